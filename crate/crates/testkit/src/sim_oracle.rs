//! Brute-force simulation oracle.
//!
//! Recomputes removal sets round by round from the written definitions,
//! rebuilding the blocked-script set from scratch on each pass instead
//! of maintaining it incrementally like the engine does.

use std::collections::{BTreeMap, BTreeSet};

use jsblock_core::label::LabeledTrace;
use jsblock_core::sim::{BlockingPlan, RemovalCause};
use jsblock_core::trace::NetworkRequest;

/// Exhaustively recompute the removal set and causes for one trace.
pub fn oracle_removed(
    labeled: &LabeledTrace,
    plan: &BlockingPlan,
) -> BTreeMap<String, RemovalCause> {
    let requests = &labeled.trace.requests;
    let mut removed: BTreeMap<String, RemovalCause> = BTreeMap::new();
    loop {
        // Blocked scripts as of this round: the plan's plus every script
        // delivered by a request that is already removed.
        let mut blocked: BTreeSet<String> = plan.blocked_scripts.clone();
        for req in requests {
            if removed.contains_key(&req.request_id) {
                if let Some(fetched) = &req.fetched_script_url {
                    blocked.insert(fetched.clone());
                }
            }
        }
        let mut grew = false;
        for req in requests {
            if removed.contains_key(&req.request_id) {
                continue;
            }
            let direct = stack_touches(req, &plan.blocked_scripts)
                || req.stack.iter().any(|f| {
                    plan.blocked_methods
                        .contains(&(f.script_url.clone(), f.method_name.clone()))
                });
            let fetch_blocked = req
                .fetched_script_url
                .as_ref()
                .is_some_and(|s| plan.blocked_scripts.contains(s));
            let cascade = stack_touches(req, &blocked)
                || req.fetched_script_url.as_ref().is_some_and(|s| blocked.contains(s));
            let cause = if direct {
                Some(RemovalCause::DirectBlock)
            } else if fetch_blocked {
                Some(RemovalCause::ScriptFetchBlocked)
            } else if cascade {
                Some(RemovalCause::Cascade)
            } else {
                None
            };
            if let Some(cause) = cause {
                removed.insert(req.request_id.clone(), cause);
                grew = true;
            }
        }
        if !grew {
            return removed;
        }
    }
}

/// Surviving tag indices under the written tag-survival rule.
pub fn oracle_surviving_tags(
    labeled: &LabeledTrace,
    removed: &BTreeMap<String, RemovalCause>,
) -> Vec<usize> {
    let removed_urls: BTreeSet<&str> = labeled
        .trace
        .requests
        .iter()
        .filter(|r| removed.contains_key(&r.request_id))
        .map(|r| r.url.as_str())
        .collect();
    labeled
        .trace
        .tags
        .iter()
        .enumerate()
        .filter(|(_, t)| !removed_urls.contains(t.src_url.as_str()))
        .map(|(i, _)| i)
        .collect()
}

fn stack_touches(req: &NetworkRequest, scripts: &BTreeSet<String>) -> bool {
    req.stack.iter().any(|f| scripts.contains(&f.script_url))
}
