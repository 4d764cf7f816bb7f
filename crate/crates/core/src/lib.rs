//! Trace-driven JavaScript blocking analysis.
//!
//! The pipeline, end to end: parse page-load traces, label network
//! requests tracking/functional with Adblock-dialect filter lists,
//! localize tracking to scripts and methods via a log10 participation
//! score, resolve blocking configurations into concrete plans, simulate
//! their effect on traces, rewrite method definitions in JS source, and
//! compute breakage metrics over the results.
//!
//! Modules map to pipeline stages:
//! - [`trace`]: the page-load data model and its canonical JSON form
//! - [`filter`]: filter-list parsing and URL matching
//! - [`psl`]: registrable-domain extraction (third-party checks)
//! - [`label`]: request labeling
//! - [`localize`]: participation counting, tracking scores, classes
//! - [`sim`]: blocking plans and trace simulation
//! - [`rewrite`]: lossless JS lexing and method renaming
//! - [`metrics`]: request/tag diffs, deciles, corpus aggregation
//! - [`export`]: every on-disk CSV/JSON format
//! - [`fixtures`]: deterministic corpora for tests and `selftest`

pub mod export;
pub mod filter;
pub mod fixtures;
pub mod label;
pub mod localize;
pub mod metrics;
pub mod psl;
pub mod rewrite;
pub mod sim;
pub mod trace;
pub mod url;

pub use filter::{FilterRule, FilterSet, MatchContext, MatchDecision};
pub use label::{label_trace, LabeledTrace, RequestLabel};
pub use localize::{
    accumulate, classify, classify_all, tracking_score, Classification, ParticipationCounts,
    Thresholds, TrackingScore, UnitClass,
};
pub use metrics::{
    aggregate_annotations, bin_deciles, corpus_report, diff_requests, diff_tags,
    BreakageAnnotation, CorpusSummary, DecileHistogram, RequestDiff, TagDiff,
};
pub use psl::{registrable_domain, DomainError, PublicSuffixList};
pub use rewrite::{find_definitions, rename_method, tokenize, RenameOutcome, RewriteError};
pub use sim::{
    blocked_request_sets, build_all_plans, build_plan, simulate, BlockingConfig, BlockingPlan,
    RemovalCause, SimulatedTrace,
};
pub use trace::{
    parse_trace, serialize_trace, units_of, Attribution, CodeUnitId, NetworkRequest, PageTrace,
    ResourceKind, ResourceTag, StackFrame, TagKind,
};
