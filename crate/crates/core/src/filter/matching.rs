//! The match engine: rules against a prepared request URL.

use std::ops::Range;

use crate::url::split_url;

use super::{FilterRule, FilterSet, LeftAnchor, MatchContext, MatchDecision, PatternToken};

/// A request URL normalized for matching: scheme and host lowercased,
/// everything after the authority untouched.
#[derive(Debug, Clone)]
pub struct PreparedUrl {
    pub text: String,
    pub host: Option<Range<usize>>,
}

/// Normalize a request URL once; reusable across many rules.
pub fn prepare_url(url: &str) -> PreparedUrl {
    match split_url(url) {
        Some(parts) => {
            let mut text = url.to_string();
            // Only ASCII case matters in scheme/host position.
            text[..parts.host.end].make_ascii_lowercase();
            PreparedUrl { text, host: Some(parts.host) }
        }
        None => PreparedUrl { text: url.to_string(), host: None },
    }
}

/// Match one request against a set. Any matching exception rule wins.
pub fn match_url<'a>(set: &'a FilterSet, ctx: &MatchContext) -> MatchDecision<'a> {
    let prepared = prepare_url(&ctx.request_url);
    let page_host = page_host_of(&ctx.page_url);
    for rule in &set.exception_rules {
        if rule_matches_prepared(rule, ctx, &prepared, &page_host) {
            return MatchDecision::Allow(rule);
        }
    }
    for rule in &set.block_rules {
        if rule_matches_prepared(rule, ctx, &prepared, &page_host) {
            return MatchDecision::Block(rule);
        }
    }
    MatchDecision::NoMatch
}

/// Does a single rule fire for this context?
pub fn rule_matches(rule: &FilterRule, ctx: &MatchContext) -> bool {
    let prepared = prepare_url(&ctx.request_url);
    rule_matches_prepared(rule, ctx, &prepared, &page_host_of(&ctx.page_url))
}

fn page_host_of(page_url: &str) -> String {
    crate::url::host_of(page_url).unwrap_or("").to_ascii_lowercase()
}

fn rule_matches_prepared(
    rule: &FilterRule,
    ctx: &MatchContext,
    prepared: &PreparedUrl,
    page_host: &str,
) -> bool {
    if !rule.options.allows_party(ctx.is_third_party) {
        return false;
    }
    if !rule.options.allows_kind(ctx.resource_kind) {
        return false;
    }
    if !rule.options.allows_page_host(page_host) {
        return false;
    }
    pattern_matches(rule, prepared)
}

fn pattern_matches(rule: &FilterRule, prepared: &PreparedUrl) -> bool {
    let text = prepared.text.as_bytes();
    match rule.left_anchor {
        LeftAnchor::UrlStart => match_from(&rule.tokens, text, 0, rule.right_anchored),
        LeftAnchor::HostnameBoundary => {
            let Some(host) = &prepared.host else { return false };
            if match_from(&rule.tokens, text, host.start, rule.right_anchored) {
                return true;
            }
            (host.start..host.end).any(|i| {
                text[i] == b'.' && match_from(&rule.tokens, text, i + 1, rule.right_anchored)
            })
        }
        LeftAnchor::None => {
            (0..=text.len()).any(|s| match_from(&rule.tokens, text, s, rule.right_anchored))
        }
    }
}

/// `^` class: anything outside `[A-Za-z0-9_\-.%]`. End-of-URL is handled
/// at the call sites as a zero-width match.
pub(crate) fn is_separator_byte(b: u8) -> bool {
    !(b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'%'))
}

/// Anchored glob match with iterative wildcard backtracking.
///
/// Wildcards remember one resume point (the classic O(n·m) scheme);
/// separators are deterministic at every position, so no further
/// backtracking state is needed.
fn match_from(tokens: &[PatternToken], text: &[u8], start: usize, right_anchored: bool) -> bool {
    let mut ti = 0;
    let mut pos = start;
    let mut resume: Option<(usize, usize)> = None;
    loop {
        if ti < tokens.len() {
            match &tokens[ti] {
                PatternToken::Wildcard => {
                    resume = Some((ti + 1, pos));
                    ti += 1;
                    continue;
                }
                PatternToken::Separator => {
                    if pos < text.len() && is_separator_byte(text[pos]) {
                        pos += 1;
                        ti += 1;
                        continue;
                    }
                    if pos == text.len() {
                        ti += 1;
                        continue;
                    }
                }
                PatternToken::Literal(lit) => {
                    if text[pos..].starts_with(lit.as_bytes()) {
                        pos += lit.len();
                        ti += 1;
                        continue;
                    }
                }
            }
        } else if !right_anchored || pos == text.len() {
            return true;
        }
        match resume {
            Some((resume_ti, resume_pos)) if resume_pos < text.len() => {
                resume = Some((resume_ti, resume_pos + 1));
                ti = resume_ti;
                pos = resume_pos + 1;
            }
            _ => return false,
        }
    }
}
