//! Character-level reference matcher.
//!
//! Naive recursion straight from the written matching rules: try every
//! start position the anchor allows, try both alternatives wherever a
//! definition allows one. Nothing is shared with the engine's iterative
//! backtracking matcher; agreement between the two routes is the point.

use jsblock_core::filter::{FilterRule, FilterSet, LeftAnchor, MatchContext, PatternToken};

/// Reference decision for a whole set: "allow", "block", or "none".
pub fn oracle_decision(set: &FilterSet, ctx: &MatchContext) -> &'static str {
    if set.exception_rules.iter().any(|r| oracle_rule_matches(r, ctx)) {
        "allow"
    } else if set.block_rules.iter().any(|r| oracle_rule_matches(r, ctx)) {
        "block"
    } else {
        "none"
    }
}

/// Reference semantics for one rule.
pub fn oracle_rule_matches(rule: &FilterRule, ctx: &MatchContext) -> bool {
    if !rule.options.allows_party(ctx.is_third_party) {
        return false;
    }
    if !rule.options.allows_kind(ctx.resource_kind) {
        return false;
    }
    let page_host = naive_host(&ctx.page_url).unwrap_or_default().to_ascii_lowercase();
    if !rule.options.allows_page_host(&page_host) {
        return false;
    }

    // Normalize per the written rule: lowercase scheme and host, leave
    // the rest of the URL alone.
    let url = naive_normalize(&ctx.request_url);
    let text = url.as_bytes();

    let starts: Vec<usize> = match rule.left_anchor {
        LeftAnchor::UrlStart => vec![0],
        LeftAnchor::None => (0..=text.len()).collect(),
        LeftAnchor::HostnameBoundary => {
            let Some(host) = naive_host(&url) else { return false };
            let host_start = host.as_ptr() as usize - url.as_ptr() as usize;
            let mut starts = vec![host_start];
            for (i, b) in host.bytes().enumerate() {
                if b == b'.' {
                    starts.push(host_start + i + 1);
                }
            }
            starts
        }
    };
    starts.into_iter().any(|s| rec_match(&rule.tokens, text, s, rule.right_anchored))
}

fn rec_match(tokens: &[PatternToken], text: &[u8], pos: usize, right_anchored: bool) -> bool {
    match tokens.first() {
        None => !right_anchored || pos == text.len(),
        Some(PatternToken::Literal(lit)) => {
            text[pos..].starts_with(lit.as_bytes())
                && rec_match(&tokens[1..], text, pos + lit.len(), right_anchored)
        }
        Some(PatternToken::Separator) => {
            if pos < text.len()
                && is_separator_byte(text[pos])
                && rec_match(&tokens[1..], text, pos + 1, right_anchored)
            {
                return true;
            }
            pos == text.len() && rec_match(&tokens[1..], text, pos, right_anchored)
        }
        Some(PatternToken::Wildcard) => {
            (pos..=text.len()).any(|k| rec_match(&tokens[1..], text, k, right_anchored))
        }
    }
}

fn is_separator_byte(b: u8) -> bool {
    !(b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'%'))
}

/// Host extraction written from scratch: strip scheme://, userinfo@,
/// :port, and cut at the first of / ? #. Returns a slice of the input.
pub fn naive_host(url: &str) -> Option<&str> {
    let (scheme, rest) = url.split_once("://")?;
    if scheme.is_empty() {
        return None;
    }
    let authority = rest.split(['/', '?', '#']).next().unwrap_or(rest);
    let host = authority.rsplit_once('@').map(|(_, h)| h).unwrap_or(authority);
    let host = if host.starts_with('[') {
        host.trim_start_matches('[').split(']').next().unwrap_or("")
    } else {
        match host.rsplit_once(':') {
            Some((h, port)) if !port.is_empty() && port.bytes().all(|b| b.is_ascii_digit()) => h,
            _ => host,
        }
    };
    (!host.is_empty()).then_some(host)
}

fn naive_normalize(url: &str) -> String {
    match naive_host(url) {
        Some(host) => {
            let boundary = host.as_ptr() as usize - url.as_ptr() as usize + host.len();
            let mut out = url[..boundary].to_ascii_lowercase();
            out.push_str(&url[boundary..]);
            out
        }
        None => url.to_string(),
    }
}
