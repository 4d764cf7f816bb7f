//! Request labeling: filter lists positively identify tracking, so a
//! blocked request is Tracking and everything else is Functional.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::filter::{match_url, FilterSet, MatchContext, MatchDecision};
use crate::psl::PublicSuffixList;
use crate::trace::PageTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestLabel {
    Tracking,
    Functional,
}

impl RequestLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestLabel::Tracking => "tracking",
            RequestLabel::Functional => "functional",
        }
    }
}

impl fmt::Display for RequestLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trace plus a total request_id → label map and, where a rule fired,
/// the deciding rule text for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrace {
    pub trace: PageTrace,
    pub labels: BTreeMap<String, RequestLabel>,
    pub deciding_rule: BTreeMap<String, String>,
}

impl LabeledTrace {
    pub fn label_of(&self, request_id: &str) -> RequestLabel {
        self.labels[request_id]
    }

    pub fn tracking_count(&self) -> usize {
        self.labels.values().filter(|l| **l == RequestLabel::Tracking).count()
    }

    pub fn functional_count(&self) -> usize {
        self.labels.values().filter(|l| **l == RequestLabel::Functional).count()
    }
}

/// Label every request in `trace` against `set`.
///
/// The page context of every request is the trace's page_url; traces do
/// not carry frame trees.
pub fn label_trace(trace: &PageTrace, set: &FilterSet, psl: &PublicSuffixList) -> LabeledTrace {
    let mut labels = BTreeMap::new();
    let mut deciding_rule = BTreeMap::new();
    for req in &trace.requests {
        let ctx = MatchContext::derive(&req.url, &trace.page_url, req.resource_kind, psl);
        let decision = match_url(set, &ctx);
        let label = match decision {
            MatchDecision::Block(_) => RequestLabel::Tracking,
            MatchDecision::Allow(_) | MatchDecision::NoMatch => RequestLabel::Functional,
        };
        if let Some(rule) = decision.deciding_rule() {
            deciding_rule.insert(req.request_id.clone(), rule.raw.clone());
        }
        labels.insert(req.request_id.clone(), label);
    }
    LabeledTrace { trace: trace.clone(), labels, deciding_rule }
}
