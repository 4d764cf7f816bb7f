//! Filter-list text parsing.

use std::collections::BTreeSet;

use crate::trace::ResourceKind;

use super::{FilterRule, FilterSet, LeftAnchor, PartyConstraint, PatternToken, RuleOptions};

/// Why a line contributed no rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineDisposition {
    Blank,
    Comment,
    Cosmetic,
    /// `/.../` rules are not supported; counted so labels stay auditable.
    Regex,
    /// Rule uses an option outside the supported subset; enforcing it
    /// wrongly would corrupt labels, so the whole rule is skipped.
    UnsupportedOption(String),
}

/// A line that looked like a network rule but failed the grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line_no: usize,
    pub text: String,
    pub reason: String,
}

/// Per-parse accounting: accepted / skipped / rejected line counts.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub accepted: usize,
    pub skipped_blank: usize,
    pub skipped_comments: usize,
    pub skipped_cosmetic: usize,
    pub skipped_regex: usize,
    pub skipped_unsupported: Vec<(usize, String)>,
    pub rejected: Vec<RejectedLine>,
}

impl ParseReport {
    pub fn skipped_total(&self) -> usize {
        self.skipped_blank
            + self.skipped_comments
            + self.skipped_cosmetic
            + self.skipped_regex
            + self.skipped_unsupported.len()
    }

    pub fn merge(&mut self, other: ParseReport) {
        self.accepted += other.accepted;
        self.skipped_blank += other.skipped_blank;
        self.skipped_comments += other.skipped_comments;
        self.skipped_cosmetic += other.skipped_cosmetic;
        self.skipped_regex += other.skipped_regex;
        self.skipped_unsupported.extend(other.skipped_unsupported);
        self.rejected.extend(other.rejected);
    }
}

/// Parse one list. Nothing here is fatal: bad lines land in the report.
pub fn parse_list(text: &str, source_name: &str) -> (FilterSet, ParseReport) {
    let mut set = FilterSet { source_names: vec![source_name.to_string()], ..FilterSet::default() };
    let mut report = ParseReport::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        match parse_line(line) {
            Ok(Some(rule)) => {
                report.accepted += 1;
                set.push(rule);
            }
            Ok(None) => match classify_skip(line) {
                LineDisposition::Blank => report.skipped_blank += 1,
                LineDisposition::Comment => report.skipped_comments += 1,
                LineDisposition::Cosmetic => report.skipped_cosmetic += 1,
                LineDisposition::Regex => report.skipped_regex += 1,
                LineDisposition::UnsupportedOption(opt) => {
                    report.skipped_unsupported.push((line_no, opt));
                }
            },
            Err(reason) => report.rejected.push(RejectedLine {
                line_no,
                text: line.to_string(),
                reason,
            }),
        }
    }
    (set, report)
}

/// Parse several lists into one set; sources keep their order.
pub fn parse_lists<'a>(
    sources: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> (FilterSet, ParseReport) {
    let mut set = FilterSet::default();
    let mut report = ParseReport::default();
    for (name, text) in sources {
        let (mut one, r) = parse_list(text, name);
        set.block_rules.append(&mut one.block_rules);
        set.exception_rules.append(&mut one.exception_rules);
        set.source_names.push(name.to_string());
        report.merge(r);
    }
    (set, report)
}

fn classify_skip(line: &str) -> LineDisposition {
    if line.is_empty() {
        return LineDisposition::Blank;
    }
    if line.starts_with('!') || line.starts_with('[') {
        return LineDisposition::Comment;
    }
    if is_cosmetic(line) {
        return LineDisposition::Cosmetic;
    }
    let body = line.strip_prefix("@@").unwrap_or(line);
    let (pattern, options) = split_options(body);
    if is_regex_rule(pattern) {
        return LineDisposition::Regex;
    }
    if let Some(opts) = options {
        for opt in opts.split(',') {
            if parse_option(opt, &mut RuleOptions::default()).is_err() {
                return LineDisposition::UnsupportedOption(opt.trim().to_string());
            }
        }
    }
    LineDisposition::Blank
}

/// `Ok(Some)` = rule, `Ok(None)` = skip (reason via classify_skip),
/// `Err` = grammar failure → rejects list.
fn parse_line(line: &str) -> Result<Option<FilterRule>, String> {
    if line.is_empty() || line.starts_with('!') || line.starts_with('[') {
        return Ok(None);
    }
    if is_cosmetic(line) {
        return Ok(None);
    }
    let (is_exception, body) = match line.strip_prefix("@@") {
        Some(rest) => (true, rest),
        None => (false, line),
    };
    if body.is_empty() {
        return Err("exception marker with no rule body".into());
    }
    let (pattern_part, options_part) = split_options(body);
    if is_regex_rule(pattern_part) {
        return Ok(None);
    }
    if pattern_part.chars().any(char::is_whitespace) {
        return Err("pattern contains whitespace".into());
    }

    let mut options = RuleOptions::default();
    if let Some(opts) = options_part {
        if opts.is_empty() {
            return Err("empty option list after '$'".into());
        }
        for opt in opts.split(',') {
            match parse_option(opt, &mut options) {
                Ok(()) => {}
                Err(OptionError::Unsupported) => return Ok(None),
                Err(OptionError::Malformed(reason)) => return Err(reason),
            }
        }
    }

    let mut pattern = pattern_part;
    let left_anchor = if let Some(rest) = pattern.strip_prefix("||") {
        pattern = rest;
        LeftAnchor::HostnameBoundary
    } else if let Some(rest) = pattern.strip_prefix('|') {
        pattern = rest;
        LeftAnchor::UrlStart
    } else {
        LeftAnchor::None
    };
    let right_anchored = if let Some(rest) = pattern.strip_suffix('|') {
        pattern = rest;
        true
    } else {
        false
    };

    // Host matching is case-insensitive: for anchored patterns the
    // leading segment is hostname territory, so fold it here. URLs get
    // the mirror treatment at match time; paths stay case-sensitive.
    let folded;
    if left_anchor != LeftAnchor::None {
        folded = lowercase_host_prefix(pattern);
        pattern = &folded;
    }
    let tokens = tokenize_pattern(pattern);
    let unconstrained = tokens.is_empty()
        && left_anchor == LeftAnchor::None
        && !right_anchored
        && options.is_empty();
    if unconstrained {
        return Err("rule has neither a pattern nor options".into());
    }
    Ok(Some(FilterRule {
        raw: line.to_string(),
        is_exception,
        left_anchor,
        right_anchored,
        tokens,
        options,
    }))
}

fn is_cosmetic(line: &str) -> bool {
    ["#@#", "#?#", "#$#", "#%#", "##"].iter().any(|m| line.contains(m))
}

fn is_regex_rule(pattern: &str) -> bool {
    pattern.len() >= 2 && pattern.starts_with('/') && pattern.ends_with('/')
}

/// Options follow the last `$`, per list convention.
fn split_options(body: &str) -> (&str, Option<&str>) {
    match body.rfind('$') {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    }
}

enum OptionError {
    Unsupported,
    Malformed(String),
}

fn parse_option(opt: &str, options: &mut RuleOptions) -> Result<(), OptionError> {
    let opt = opt.trim();
    if opt.is_empty() {
        return Err(OptionError::Malformed("empty option".into()));
    }
    if let Some(domains) = opt.strip_prefix("domain=") {
        return parse_domain_list(domains, options);
    }
    let (negated, name) = match opt.strip_prefix('~') {
        Some(rest) => (true, rest),
        None => (false, opt),
    };
    if name == "third-party" {
        let constraint = if negated {
            PartyConstraint::FirstPartyOnly
        } else {
            PartyConstraint::ThirdPartyOnly
        };
        if options.party.is_some() && options.party != Some(constraint) {
            return Err(OptionError::Malformed("conflicting party options".into()));
        }
        options.party = Some(constraint);
        return Ok(());
    }
    if let Some(kind) = resource_kind_option(name) {
        if negated {
            options.kinds_exclude.insert(kind);
        } else {
            options.kinds_include.insert(kind);
        }
        if options.kinds_include.contains(&kind) && options.kinds_exclude.contains(&kind) {
            return Err(OptionError::Malformed(format!(
                "resource kind {kind} both included and excluded"
            )));
        }
        return Ok(());
    }
    Err(OptionError::Unsupported)
}

fn resource_kind_option(name: &str) -> Option<ResourceKind> {
    Some(match name {
        "script" => ResourceKind::Script,
        "image" => ResourceKind::Image,
        "subdocument" => ResourceKind::Subdocument,
        "stylesheet" => ResourceKind::Stylesheet,
        "xhr" | "xmlhttprequest" => ResourceKind::Xhr,
        "media" => ResourceKind::Media,
        "other" => ResourceKind::Other,
        _ => return None,
    })
}

fn parse_domain_list(domains: &str, options: &mut RuleOptions) -> Result<(), OptionError> {
    if domains.is_empty() {
        return Err(OptionError::Malformed("empty domain= list".into()));
    }
    let mut include = BTreeSet::new();
    let mut exclude = BTreeSet::new();
    for entry in domains.split('|') {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(OptionError::Malformed("empty entry in domain= list".into()));
        }
        if let Some(rest) = entry.strip_prefix('~') {
            exclude.insert(rest.to_ascii_lowercase());
        } else {
            include.insert(entry.to_ascii_lowercase());
        }
    }
    if include.intersection(&exclude).next().is_some() {
        return Err(OptionError::Malformed("domain= include and exclude overlap".into()));
    }
    options.domain_include = include;
    options.domain_exclude = exclude;
    Ok(())
}

/// Lowercase the scheme/host segment of an anchored pattern: everything
/// before the first `/`, `^`, `*` or `?` past any `://`. Those are the
/// only bytes that can end a hostname, so the folded span never reaches
/// into the path.
fn lowercase_host_prefix(pattern: &str) -> String {
    let search_from = pattern.find("://").map(|i| i + 3).unwrap_or(0);
    let end = pattern[search_from..]
        .find(['/', '^', '*', '?'])
        .map(|i| search_from + i)
        .unwrap_or(pattern.len());
    let mut out = pattern.to_string();
    out[..end].make_ascii_lowercase();
    out
}

fn tokenize_pattern(pattern: &str) -> Vec<PatternToken> {
    let mut tokens = Vec::new();
    let mut literal = String::new();
    for c in pattern.chars() {
        match c {
            '*' => {
                if !literal.is_empty() {
                    tokens.push(PatternToken::Literal(std::mem::take(&mut literal)));
                }
                if tokens.last() != Some(&PatternToken::Wildcard) {
                    tokens.push(PatternToken::Wildcard);
                }
            }
            '^' => {
                if !literal.is_empty() {
                    tokens.push(PatternToken::Literal(std::mem::take(&mut literal)));
                }
                tokens.push(PatternToken::Separator);
            }
            other => literal.push(other),
        }
    }
    if !literal.is_empty() {
        tokens.push(PatternToken::Literal(literal));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_plus_block_rule() {
        let (set, report) = parse_list("! comment\n||doubleclick.net^", "t");
        assert_eq!(set.block_rules.len(), 1);
        assert_eq!(set.exception_rules.len(), 0);
        assert_eq!(report.accepted, 1);
        assert_eq!(report.skipped_comments, 1);
        let rule = &set.block_rules[0];
        assert_eq!(rule.left_anchor, LeftAnchor::HostnameBoundary);
        assert_eq!(
            rule.tokens,
            vec![PatternToken::Literal("doubleclick.net".into()), PatternToken::Separator]
        );
    }

    #[test]
    fn empty_input() {
        let (set, report) = parse_list("", "t");
        assert!(set.is_empty());
        assert_eq!(report.accepted, 0);
    }

    #[test]
    fn exception_with_kind_constraint() {
        let (set, _) = parse_list("@@||livescore.com^$script", "t");
        assert_eq!(set.exception_rules.len(), 1);
        let rule = &set.exception_rules[0];
        assert!(rule.is_exception);
        assert_eq!(
            rule.options.kinds_include.iter().copied().collect::<Vec<_>>(),
            vec![ResourceKind::Script]
        );
    }

    #[test]
    fn cosmetic_and_regex_skipped() {
        let (set, report) = parse_list("example.com##.ad\n/banner[0-9]+/\nexample.com#@#.ok", "t");
        assert!(set.is_empty());
        assert_eq!(report.skipped_cosmetic, 2);
        assert_eq!(report.skipped_regex, 1);
    }

    #[test]
    fn unsupported_option_skips_rule() {
        let (set, report) = parse_list("||x.com^$popup\n||y.com^$script", "t");
        assert_eq!(set.block_rules.len(), 1);
        assert_eq!(report.skipped_unsupported.len(), 1);
        assert_eq!(report.skipped_unsupported[0].1, "popup");
    }

    #[test]
    fn grammar_failures_are_rejected_not_fatal() {
        let (set, report) = parse_list("have a space\n||ok.com^\n||z.com^$\n@@", "t");
        assert_eq!(set.block_rules.len(), 1);
        assert_eq!(report.rejected.len(), 3);
    }

    #[test]
    fn domain_option_lists() {
        let (set, _) = parse_list("||x.com^$domain=a.com|~b.a.com", "t");
        let opts = &set.block_rules[0].options;
        assert!(opts.domain_include.contains("a.com"));
        assert!(opts.domain_exclude.contains("b.a.com"));
    }

    #[test]
    fn overlapping_domain_lists_rejected() {
        let (_, report) = parse_list("||x.com^$domain=a.com|~a.com", "t");
        assert_eq!(report.rejected.len(), 1);
    }

    #[test]
    fn anchors_parse() {
        let (set, _) = parse_list("|https://exact.com/path|", "t");
        let rule = &set.block_rules[0];
        assert_eq!(rule.left_anchor, LeftAnchor::UrlStart);
        assert!(rule.right_anchored);
    }

    #[test]
    fn anchored_host_segments_fold_to_lowercase() {
        let (set, _) = parse_list("||DoubleClick.net^AdPath\n|HTTPS://Exact.Com/CaseKept", "t");
        assert_eq!(
            set.block_rules[0].tokens[0],
            PatternToken::Literal("doubleclick.net".into())
        );
        // past the separator the pattern keeps its case
        assert_eq!(set.block_rules[0].tokens[2], PatternToken::Literal("AdPath".into()));
        assert_eq!(
            set.block_rules[1].tokens[0],
            PatternToken::Literal("https://exact.com/CaseKept".into())
        );
    }

    #[test]
    fn options_only_rule_allowed() {
        let (set, _) = parse_list("$script,third-party", "t");
        assert_eq!(set.block_rules.len(), 1);
        assert!(set.block_rules[0].tokens.is_empty());
    }
}
