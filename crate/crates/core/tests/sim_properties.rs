//! Simulation properties over seeded random traces: oracle agreement,
//! plan monotonicity, config containments, and diff behavior.

use jsblock_core::label::LabeledTrace;
use jsblock_core::localize::{accumulate, classify_all, Thresholds};
use jsblock_core::metrics::diff_requests;
use jsblock_core::sim::{
    blocked_request_sets, build_plan, simulate, BlockingConfig, BlockingPlan,
};
use jsblock_core::trace::Attribution;
use jsblock_testkit::gen::{gen_labeled_trace, TraceParams};
use jsblock_testkit::sim_oracle::{oracle_removed, oracle_surviving_tags};
use jsblock_testkit::{rng, ChaCha8Rng, Rng};

fn classification_of(labeled: &LabeledTrace) -> jsblock_core::localize::Classification {
    let counts = accumulate([labeled], Attribution::FullStack);
    classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT)
}

#[test]
fn simulate_agrees_with_bruteforce_oracle() {
    let mut rng = rng(0x51317);
    let params = TraceParams { max_requests: 20, ..TraceParams::default() };
    for i in 0..200 {
        let labeled = gen_labeled_trace(&mut rng, params);
        let cls = classification_of(&labeled);
        for config in BlockingConfig::ALL_CONFIGS {
            let plan = build_plan(&cls, config);
            let sim = simulate(&labeled, &plan);
            let expect = oracle_removed(&labeled, &plan);
            assert_eq!(sim.removed_requests, expect, "trace {i} config {config}");
            assert_eq!(
                sim.surviving_tags,
                oracle_surviving_tags(&labeled, &expect),
                "trace {i} config {config} tags"
            );
            let survivors: std::collections::BTreeSet<_> =
                sim.surviving_requests.iter().cloned().collect();
            // surviving and removed partition the control requests
            assert_eq!(
                survivors.len() + sim.removed_requests.len(),
                labeled.trace.requests.len()
            );
            assert!(survivors.iter().all(|id| !sim.removed_requests.contains_key(id)));
        }
    }
}

fn random_plan(rng: &mut ChaCha8Rng, labeled: &LabeledTrace) -> BlockingPlan {
    let mut plan = BlockingPlan::empty(BlockingConfig::Ts);
    for req in &labeled.trace.requests {
        for frame in &req.stack {
            if rng.gen_bool(0.15) {
                plan.blocked_scripts.insert(frame.script_url.clone());
            }
            if rng.gen_bool(0.1) {
                plan.blocked_methods
                    .insert((frame.script_url.clone(), frame.method_name.clone()));
            }
        }
    }
    plan
}

/// plan P componentwise-subset of Q implies removed(P) ⊆ removed(Q),
/// and the request diff's missing counts grow monotonically with it.
#[test]
fn plan_monotonicity() {
    let mut rng = rng(0x90170);
    for _ in 0..300 {
        let labeled = gen_labeled_trace(&mut rng, TraceParams::default());
        let p = random_plan(&mut rng, &labeled);
        let mut q = p.clone();
        let extra = random_plan(&mut rng, &labeled);
        q.blocked_scripts.extend(extra.blocked_scripts);
        q.blocked_methods.extend(extra.blocked_methods);
        assert!(p.is_subset_of(&q));

        let sim_p = simulate(&labeled, &p);
        let sim_q = simulate(&labeled, &q);
        assert!(
            sim_p.removed_ids().is_subset(&sim_q.removed_ids()),
            "bigger plan removed fewer requests"
        );
        let diff_p = diff_requests(&labeled, &sim_p);
        let diff_q = diff_requests(&labeled, &sim_q);
        assert!(diff_p.missing_tracking <= diff_q.missing_tracking);
        assert!(diff_p.missing_functional <= diff_q.missing_functional);
        for diff in [&diff_p, &diff_q] {
            assert!((0.0..=100.0).contains(&diff.pct_reduction_tracking));
            assert!((0.0..=100.0).contains(&diff.pct_reduction_functional));
            assert!(diff.missing_tracking <= diff.control_tracking);
            assert!(diff.missing_functional <= diff.control_functional);
        }
    }
}

#[test]
fn config_containments_hold() {
    let mut rng = rng(0xC0417);
    for i in 0..300 {
        let labeled = gen_labeled_trace(&mut rng, TraceParams::default());
        let cls = classification_of(&labeled);
        let plans: Vec<BlockingPlan> =
            BlockingConfig::ALL_CONFIGS.iter().map(|&c| build_plan(&cls, c)).collect();
        let sets = blocked_request_sets(&labeled, &plans);
        assert!(sets[&BlockingConfig::Ctrl].is_empty(), "trace {i}: CTRL removed something");
        assert!(sets[&BlockingConfig::Ts].is_subset(&sets[&BlockingConfig::Tms]), "trace {i}");
        assert!(sets[&BlockingConfig::Tms].is_subset(&sets[&BlockingConfig::All]), "trace {i}");
        assert!(sets[&BlockingConfig::Ms].is_subset(&sets[&BlockingConfig::Tms]), "trace {i}");
        assert!(sets[&BlockingConfig::Tm].is_subset(&sets[&BlockingConfig::Tms]), "trace {i}");
    }
}

#[test]
fn empty_plan_diff_is_all_zero() {
    let mut rng = rng(0x2E40);
    for _ in 0..100 {
        let labeled = gen_labeled_trace(&mut rng, TraceParams::default());
        let sim = simulate(&labeled, &BlockingPlan::empty(BlockingConfig::Ctrl));
        let diff = diff_requests(&labeled, &sim);
        assert_eq!(diff.missing_tracking, 0);
        assert_eq!(diff.missing_functional, 0);
        assert_eq!(diff.pct_reduction_tracking, 0.0);
        assert_eq!(diff.pct_reduction_functional, 0.0);
        assert_eq!(sim.surviving_tags.len(), labeled.trace.tags.len());
    }
}
