//! Blocking configurations and trace simulation.
//!
//! A plan resolves one of the six configurations against a corpus
//! classification into concrete blocked scripts and methods. Simulation
//! then replays a trace under that plan: requests die when a blocked
//! unit appears in their stack (a blocked script never executes; a
//! renamed method's invocation kills everything it would have done),
//! fetches of blocked scripts die, and scripts whose delivery died are
//! themselves treated as blocked, iterated to a fixpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::label::LabeledTrace;
use crate::localize::{Classification, UnitClass};

/// The six blocking configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockingConfig {
    #[serde(rename = "CTRL")]
    Ctrl,
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "TS")]
    Ts,
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "TMS")]
    Tms,
    #[serde(rename = "TM")]
    Tm,
}

impl BlockingConfig {
    pub const ALL_CONFIGS: [BlockingConfig; 6] = [
        BlockingConfig::Ctrl,
        BlockingConfig::All,
        BlockingConfig::Ts,
        BlockingConfig::Ms,
        BlockingConfig::Tms,
        BlockingConfig::Tm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockingConfig::Ctrl => "CTRL",
            BlockingConfig::All => "ALL",
            BlockingConfig::Ts => "TS",
            BlockingConfig::Ms => "MS",
            BlockingConfig::Tms => "TMS",
            BlockingConfig::Tm => "TM",
        }
    }
}

impl fmt::Display for BlockingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockingConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CTRL" => Ok(BlockingConfig::Ctrl),
            "ALL" => Ok(BlockingConfig::All),
            "TS" => Ok(BlockingConfig::Ts),
            "MS" => Ok(BlockingConfig::Ms),
            "TMS" => Ok(BlockingConfig::Tms),
            "TM" => Ok(BlockingConfig::Tm),
            other => Err(format!("unknown blocking configuration {other:?}")),
        }
    }
}

/// A configuration resolved to concrete blocked units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingPlan {
    pub config: BlockingConfig,
    pub blocked_scripts: BTreeSet<String>,
    /// (script URL, method name) pairs.
    pub blocked_methods: BTreeSet<(String, String)>,
}

impl BlockingPlan {
    pub fn empty(config: BlockingConfig) -> Self {
        BlockingPlan { config, blocked_scripts: BTreeSet::new(), blocked_methods: BTreeSet::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.blocked_scripts.is_empty() && self.blocked_methods.is_empty()
    }

    /// Componentwise subset test.
    pub fn is_subset_of(&self, other: &BlockingPlan) -> bool {
        self.blocked_scripts.is_subset(&other.blocked_scripts)
            && self.blocked_methods.is_subset(&other.blocked_methods)
    }
}

/// Resolve a configuration against a classification.
///
/// TM blocks Tracking-class methods; these live in Tracking or Mixed
/// scripts (a method's counts are bounded by its script's, and the plan
/// keeps only methods whose owning script classifies that way), which
/// is what makes removed(TM) ⊆ removed(TMS) hold on every trace.
pub fn build_plan(cls: &Classification, config: BlockingConfig) -> BlockingPlan {
    let mut plan = BlockingPlan::empty(config);
    match config {
        BlockingConfig::Ctrl => {}
        BlockingConfig::All => {
            plan.blocked_scripts =
                cls.script_units().map(|(u, _)| u.script_url().to_string()).collect();
        }
        BlockingConfig::Ts => {
            plan.blocked_scripts = scripts_with_class(cls, &[UnitClass::Tracking]);
        }
        BlockingConfig::Ms => {
            plan.blocked_scripts = scripts_with_class(cls, &[UnitClass::Mixed]);
        }
        BlockingConfig::Tms => {
            plan.blocked_scripts = scripts_with_class(cls, &[UnitClass::Tracking, UnitClass::Mixed]);
        }
        BlockingConfig::Tm => {
            let eligible_scripts = scripts_with_class(cls, &[UnitClass::Tracking, UnitClass::Mixed]);
            plan.blocked_methods = cls
                .method_units()
                .filter(|(_, rec)| rec.class == UnitClass::Tracking)
                .filter(|(unit, _)| eligible_scripts.contains(unit.script_url()))
                .map(|(unit, _)| {
                    (unit.script_url().to_string(), unit.method_name().unwrap().to_string())
                })
                .collect();
        }
    }
    plan
}

fn scripts_with_class(cls: &Classification, classes: &[UnitClass]) -> BTreeSet<String> {
    cls.script_units()
        .filter(|(_, rec)| classes.contains(&rec.class))
        .map(|(u, _)| u.script_url().to_string())
        .collect()
}

/// Build all six plans at once.
pub fn build_all_plans(cls: &Classification) -> BTreeMap<BlockingConfig, BlockingPlan> {
    BlockingConfig::ALL_CONFIGS.iter().map(|&c| (c, build_plan(cls, c))).collect()
}

/// Why a request vanished from the simulated trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalCause {
    /// A blocked script or method sits in the request's stack.
    #[serde(rename = "direct-block")]
    DirectBlock,
    /// The request would have delivered a script in the plan.
    #[serde(rename = "script-fetch-blocked")]
    ScriptFetchBlocked,
    /// Removed because a script's delivering request vanished earlier.
    #[serde(rename = "cascade")]
    Cascade,
}

impl RemovalCause {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalCause::DirectBlock => "direct-block",
            RemovalCause::ScriptFetchBlocked => "script-fetch-blocked",
            RemovalCause::Cascade => "cascade",
        }
    }
}

impl fmt::Display for RemovalCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How blocked-method frames are matched against a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodMatchMode {
    /// A blocked method anywhere in the stack removes the request: an
    /// exception raised mid-stack aborts everything the method would
    /// have gone on to do.
    #[default]
    AnyFrame,
    /// Sensitivity mode: only the initiator frame is considered.
    TopFrameOnly,
}

/// Result of replaying one trace under a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedTrace {
    pub config: BlockingConfig,
    /// Request ids that survive, in trace order.
    pub surviving_requests: Vec<String>,
    /// Removed request ids with their causes.
    pub removed_requests: BTreeMap<String, RemovalCause>,
    /// Indices into the control trace's tag list.
    pub surviving_tags: Vec<usize>,
}

impl SimulatedTrace {
    pub fn removed_ids(&self) -> BTreeSet<String> {
        self.removed_requests.keys().cloned().collect()
    }
}

/// Replay `labeled.trace` under `plan` with default method matching.
pub fn simulate(labeled: &LabeledTrace, plan: &BlockingPlan) -> SimulatedTrace {
    simulate_with_mode(labeled, plan, MethodMatchMode::AnyFrame)
}

pub fn simulate_with_mode(
    labeled: &LabeledTrace,
    plan: &BlockingPlan,
    mode: MethodMatchMode,
) -> SimulatedTrace {
    let trace = &labeled.trace;
    let mut removed: BTreeMap<String, RemovalCause> = BTreeMap::new();
    // Scripts blocked so far: the plan's, plus cascade additions.
    let mut effective_scripts = plan.blocked_scripts.clone();

    let stack_hits = |req: &crate::trace::NetworkRequest, scripts: &BTreeSet<String>| -> bool {
        req.stack.iter().any(|f| scripts.contains(&f.script_url))
    };
    let method_hits = |req: &crate::trace::NetworkRequest| -> bool {
        let frames: &[_] = match mode {
            MethodMatchMode::AnyFrame => &req.stack,
            MethodMatchMode::TopFrameOnly => {
                if req.stack.is_empty() {
                    &[]
                } else {
                    &req.stack[..1]
                }
            }
        };
        frames.iter().any(|f| {
            plan.blocked_methods.contains(&(f.script_url.clone(), f.method_name.clone()))
        })
    };

    // Each pass past the first removes at least one request, so the
    // fixpoint arrives within |requests| + 1 passes.
    let mut rounds = 0usize;
    let mut changed = true;
    while changed {
        changed = false;
        rounds += 1;
        debug_assert!(rounds <= trace.requests.len() + 1, "cascade failed to converge");
        for req in &trace.requests {
            if removed.contains_key(&req.request_id) {
                continue;
            }
            let cause = if stack_hits(req, &plan.blocked_scripts) || method_hits(req) {
                Some(RemovalCause::DirectBlock)
            } else if req
                .fetched_script_url
                .as_ref()
                .is_some_and(|s| plan.blocked_scripts.contains(s))
            {
                Some(RemovalCause::ScriptFetchBlocked)
            } else if stack_hits(req, &effective_scripts)
                || req
                    .fetched_script_url
                    .as_ref()
                    .is_some_and(|s| effective_scripts.contains(s))
            {
                Some(RemovalCause::Cascade)
            } else {
                None
            };
            if let Some(cause) = cause {
                removed.insert(req.request_id.clone(), cause);
                if let Some(fetched) = &req.fetched_script_url {
                    effective_scripts.insert(fetched.clone());
                }
                changed = true;
            }
        }
    }

    let surviving_requests: Vec<String> = trace
        .requests
        .iter()
        .filter(|r| !removed.contains_key(&r.request_id))
        .map(|r| r.request_id.clone())
        .collect();

    // A tag survives unless its src is the URL of a removed request.
    // Tags whose src never appears among requests always survive.
    let removed_urls: BTreeSet<&str> = trace
        .requests
        .iter()
        .filter(|r| removed.contains_key(&r.request_id))
        .map(|r| r.url.as_str())
        .collect();
    let surviving_tags: Vec<usize> = trace
        .tags
        .iter()
        .enumerate()
        .filter(|(_, t)| !removed_urls.contains(t.src_url.as_str()))
        .map(|(i, _)| i)
        .collect();

    SimulatedTrace { config: plan.config, surviving_requests, removed_requests: removed, surviving_tags }
}

/// Removed-request sets for several plans, each computed independently.
pub fn blocked_request_sets(
    labeled: &LabeledTrace,
    plans: &[BlockingPlan],
) -> BTreeMap<BlockingConfig, BTreeSet<String>> {
    plans.iter().map(|p| (p.config, simulate(labeled, p).removed_ids())).collect()
}
