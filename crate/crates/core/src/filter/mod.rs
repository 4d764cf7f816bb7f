//! Adblock-dialect network filter rules and block/allow decisions.
//!
//! Supports the practical EasyList subset needed to label network
//! requests: pattern rules with `*` wildcards and `^` separators, `||`
//! hostname anchors, `|` start/end anchors, `@@` exceptions, and the
//! `third-party`/`~third-party`, resource-kind, and `domain=` options.
//! Cosmetic rules, regex rules, and all other options are out of scope
//! and are skipped (never silently mis-enforced).
//!
//! Matching semantics, pinned so the reference oracle can agree:
//! - exception rules take precedence: if any matches, the decision is
//!   Allow no matter how many block rules match;
//! - `||` anchors at the start of any hostname label;
//! - `^` matches one byte outside `[A-Za-z0-9_\-.%]`, or the end of the
//!   URL (zero-width);
//! - `*` matches any span;
//! - the request URL's scheme and host are lowercased before matching,
//!   the rest of the URL is matched byte-for-byte.

mod matching;
mod parse;

pub use matching::{match_url, prepare_url, rule_matches, PreparedUrl};
pub use parse::{parse_list, parse_lists, LineDisposition, ParseReport, RejectedLine};

use std::collections::BTreeSet;
use std::fmt;

use crate::psl::{is_third_party, PublicSuffixList};
use crate::trace::ResourceKind;

/// One element of a rule's URL pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternToken {
    Literal(String),
    /// `*`: any span, including empty.
    Wildcard,
    /// `^`: a separator byte or the end of the URL.
    Separator,
}

/// Where the pattern is anchored on the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeftAnchor {
    /// Unanchored: the pattern may match anywhere.
    #[default]
    None,
    /// `||`: the pattern starts at a hostname-label boundary.
    HostnameBoundary,
    /// `|`: the pattern starts at the first byte of the URL.
    UrlStart,
}

/// Party constraint from `third-party` / `~third-party`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyConstraint {
    ThirdPartyOnly,
    FirstPartyOnly,
}

/// The supported option subset of a rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleOptions {
    pub party: Option<PartyConstraint>,
    pub kinds_include: BTreeSet<ResourceKind>,
    pub kinds_exclude: BTreeSet<ResourceKind>,
    pub domain_include: BTreeSet<String>,
    pub domain_exclude: BTreeSet<String>,
}

impl RuleOptions {
    pub fn is_empty(&self) -> bool {
        self.party.is_none()
            && self.kinds_include.is_empty()
            && self.kinds_exclude.is_empty()
            && self.domain_include.is_empty()
            && self.domain_exclude.is_empty()
    }

    /// Does the rule fire for this resource kind?
    pub fn allows_kind(&self, kind: ResourceKind) -> bool {
        if self.kinds_exclude.contains(&kind) {
            return false;
        }
        self.kinds_include.is_empty() || self.kinds_include.contains(&kind)
    }

    /// Does the rule fire on a page with this (lowercase) hostname?
    pub fn allows_page_host(&self, page_host: &str) -> bool {
        let within = |domain: &str| {
            page_host == domain
                || (page_host.len() > domain.len()
                    && page_host.ends_with(domain)
                    && page_host.as_bytes()[page_host.len() - domain.len() - 1] == b'.')
        };
        if self.domain_exclude.iter().any(|d| within(d)) {
            return false;
        }
        self.domain_include.is_empty() || self.domain_include.iter().any(|d| within(d))
    }

    pub fn allows_party(&self, request_is_third_party: bool) -> bool {
        match self.party {
            None => true,
            Some(PartyConstraint::ThirdPartyOnly) => request_is_third_party,
            Some(PartyConstraint::FirstPartyOnly) => !request_is_third_party,
        }
    }
}

/// A parsed network rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRule {
    /// Original rule text, verbatim.
    pub raw: String,
    /// Leading `@@`.
    pub is_exception: bool,
    pub left_anchor: LeftAnchor,
    /// Trailing `|`.
    pub right_anchored: bool,
    pub tokens: Vec<PatternToken>,
    pub options: RuleOptions,
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// A parsed filter list: block rules plus exception rules.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    pub block_rules: Vec<FilterRule>,
    pub exception_rules: Vec<FilterRule>,
    pub source_names: Vec<String>,
}

impl FilterSet {
    pub fn is_empty(&self) -> bool {
        self.block_rules.is_empty() && self.exception_rules.is_empty()
    }

    pub fn rule_count(&self) -> usize {
        self.block_rules.len() + self.exception_rules.len()
    }

    fn push(&mut self, rule: FilterRule) {
        if rule.is_exception {
            self.exception_rules.push(rule);
        } else {
            self.block_rules.push(rule);
        }
    }
}

/// Everything a single match query needs to know about a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchContext {
    pub request_url: String,
    pub page_url: String,
    pub resource_kind: ResourceKind,
    pub is_third_party: bool,
}

impl MatchContext {
    /// Build a context, deriving the third-party bit from the
    /// registrable domains of the two URLs.
    pub fn derive(
        request_url: impl Into<String>,
        page_url: impl Into<String>,
        resource_kind: ResourceKind,
        psl: &PublicSuffixList,
    ) -> Self {
        let request_url = request_url.into();
        let page_url = page_url.into();
        let third = is_third_party(&request_url, &page_url, psl);
        MatchContext { request_url, page_url, resource_kind, is_third_party: third }
    }
}

/// Outcome of matching one request against a filter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchDecision<'a> {
    Block(&'a FilterRule),
    Allow(&'a FilterRule),
    NoMatch,
}

impl<'a> MatchDecision<'a> {
    pub fn deciding_rule(&self) -> Option<&'a FilterRule> {
        match self {
            MatchDecision::Block(r) | MatchDecision::Allow(r) => Some(r),
            MatchDecision::NoMatch => None,
        }
    }

    pub fn is_block(&self) -> bool {
        matches!(self, MatchDecision::Block(_))
    }
}
