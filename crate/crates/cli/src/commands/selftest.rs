//! `selftest`: the embedded verification suite. Each check prints one
//! pass/fail line; any failure exits nonzero.

use anyhow::anyhow;

use jsblock_core::export::labeled_trace_to_json;
use jsblock_core::fixtures::{self, TAG_MANAGER_SCRIPT, MIXED_BUNDLE_SNIPPET, ANALYTICS_SNIPPET};
use jsblock_core::filter::{match_url, parse_list, rule_matches, MatchDecision};
use jsblock_core::localize::{accumulate, classify_all, Thresholds};
use jsblock_core::metrics::{bin_deciles, diff_requests};
use jsblock_core::rewrite::rename_method;
use jsblock_core::sim::{
    blocked_request_sets, build_all_plans, build_plan, simulate, BlockingConfig, BlockingPlan,
};
use jsblock_core::trace::{parse_trace, serialize_trace, Attribution, CodeUnitId};
use jsblock_core::UnitClass;
use jsblock_testkit::gen::{gen_labeled_trace, gen_match_case, TraceParams};
use jsblock_testkit::match_oracle::oracle_rule_matches;
use jsblock_testkit::sim_oracle::{oracle_removed, oracle_surviving_tags};

use crate::{CmdError, CmdResult, GlobalOpts};

const MATCHER_CASES: usize = 10_000;
const CONTAINMENT_TRACES: usize = 1_000;
const ORACLE_TRACES: usize = 500;

type Check = Box<dyn Fn() -> Result<String, String>>;

pub fn run(globals: &GlobalOpts) -> CmdResult {
    let seed = globals.seed;
    let checks: Vec<(&str, Check)> = vec![
        ("fixture-scores", Box::new(check_worked_scores)),
        ("fixture-renames", Box::new(check_fixture_renames)),
        ("config-table-plans", Box::new(check_config_table_plans)),
        ("trace-roundtrip", Box::new(check_trace_roundtrip)),
        ("matcher-oracle", Box::new(move || check_matcher_oracle(seed))),
        ("containments", Box::new(move || check_containments(seed))),
        ("sim-oracle", Box::new(move || check_sim_oracle(seed))),
        ("metrics-edges", Box::new(check_metrics_edges)),
        ("degenerate-thresholds", Box::new(check_degenerate_thresholds)),
        ("label-determinism", Box::new(check_label_determinism)),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("[selftest] {name}: PASS ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("[selftest] {name}: FAIL ({detail})");
            }
        }
    }
    if failures > 0 {
        return Err(CmdError::Data(anyhow!("{failures} selftest check(s) failed")));
    }
    Ok(())
}

fn check_worked_scores() -> Result<String, String> {
    let corpus = fixtures::tag_manager_labeled_corpus();
    let counts = accumulate(&corpus, Attribution::FullStack);
    let cls = classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT);
    let expect = [
        (CodeUnitId::script(TAG_MANAGER_SCRIPT), -0.0836, UnitClass::Mixed),
        (CodeUnitId::method(TAG_MANAGER_SCRIPT, "loader"), 2.1173, UnitClass::Tracking),
        (CodeUnitId::method(TAG_MANAGER_SCRIPT, "fireCORS"), -2.2014, UnitClass::Functional),
    ];
    for (unit, score, class) in expect {
        let rec = cls.units.get(&unit).ok_or_else(|| format!("{unit} not classified"))?;
        if (rec.score.0 - score).abs() >= 1e-4 {
            return Err(format!("{unit}: score {} vs expected {score}", rec.score));
        }
        if rec.class != class {
            return Err(format!("{unit}: class {} vs expected {class}", rec.class));
        }
    }
    Ok("three units at +-1e-4".into())
}

fn check_fixture_renames() -> Result<String, String> {
    let l1 = rename_method(MIXED_BUNDLE_SNIPPET, "u", "donotExecuteMe").map_err(|e| e.to_string())?;
    let expected = MIXED_BUNDLE_SNIPPET.replacen("u = function", "donotExecuteMe = function", 1);
    if l1.sites_renamed != 1 || l1.source != expected {
        return Err("first listing rename did not produce the expected byte diff".into());
    }
    for name in ["wd", "ta"] {
        let out = rename_method(ANALYTICS_SNIPPET, name, "doNotExecuteMe")
            .map_err(|e| e.to_string())?;
        if out.sites_renamed != 1 {
            return Err(format!("{name}: {} sites renamed, expected 1", out.sites_renamed));
        }
    }
    Ok("byte-exact diffs, counts 1/1/1".into())
}

fn check_config_table_plans() -> Result<String, String> {
    let corpus = fixtures::tag_manager_labeled_corpus();
    let counts = accumulate(&corpus, Attribution::FullStack);
    let cls = classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT);
    let plans = build_all_plans(&cls);
    let script = TAG_MANAGER_SCRIPT.to_string();
    let ok = plans[&BlockingConfig::Ctrl].is_empty()
        && plans[&BlockingConfig::All].blocked_scripts.contains(&script)
        && plans[&BlockingConfig::Ts].blocked_scripts.is_empty()
        && plans[&BlockingConfig::Ms].blocked_scripts.contains(&script)
        && plans[&BlockingConfig::Tms].blocked_scripts.contains(&script)
        && plans[&BlockingConfig::Tm].blocked_scripts.is_empty()
        && plans[&BlockingConfig::Tm]
            .blocked_methods
            .contains(&(script.clone(), "loader".to_string()));
    ok.then(|| "six rows resolved".to_string())
        .ok_or_else(|| "plan rows differ from the configuration table".into())
}

fn check_trace_roundtrip() -> Result<String, String> {
    for trace in fixtures::tag_manager_corpus().iter().chain([fixtures::fetch_chain_trace()].iter()) {
        let once = serialize_trace(trace);
        let back = parse_trace(&once).map_err(|e| e.to_string())?;
        if &back != trace {
            return Err("parse(serialize(t)) != t".into());
        }
        let twice = serialize_trace(&back);
        if once != twice {
            return Err("serialization is not a byte fixpoint".into());
        }
    }
    Ok("structural identity and byte fixpoint".into())
}

fn check_matcher_oracle(seed: u64) -> Result<String, String> {
    let mut rng = jsblock_testkit::rng(seed);
    let mut hits = 0usize;
    for i in 0..MATCHER_CASES {
        let case = gen_match_case(&mut rng);
        let (set, report) = parse_list(&case.rule_line, "gen");
        if !report.rejected.is_empty() || set.rule_count() != 1 {
            return Err(format!("case {i}: generated rule failed to parse: {}", case.rule_line));
        }
        let rule = set.block_rules.first().or(set.exception_rules.first()).unwrap();
        let engine = rule_matches(rule, &case.ctx);
        let oracle = oracle_rule_matches(rule, &case.ctx);
        if engine != oracle {
            return Err(format!(
                "case {i}: engine {engine} vs oracle {oracle} for rule {:?} url {:?}",
                case.rule_line, case.ctx.request_url
            ));
        }
        if engine {
            hits += 1;
        }
    }
    if hits < MATCHER_CASES / 20 {
        return Err(format!("only {hits} matching cases; generator too weak to trust"));
    }
    // the three hand cases
    let (set, _) = parse_list("||doubleclick.net^", "t");
    let psl = jsblock_core::psl::PublicSuffixList::bundled();
    let ctx = jsblock_core::filter::MatchContext::derive(
        "https://ad.doubleclick.net/pixel",
        "https://a.com/",
        jsblock_core::trace::ResourceKind::Image,
        psl,
    );
    if !match_url(&set, &ctx).is_block() {
        return Err("hand case: doubleclick block failed".into());
    }
    let empty = jsblock_core::filter::FilterSet::default();
    if match_url(&empty, &ctx) != MatchDecision::NoMatch {
        return Err("hand case: empty set must be NoMatch".into());
    }
    let (both, _) = parse_list("||livescore.com^\n@@||livescore.com^", "t");
    let ctx = jsblock_core::filter::MatchContext::derive(
        "https://livescore.com/api/announcements/",
        "https://livescore.com/",
        jsblock_core::trace::ResourceKind::Xhr,
        psl,
    );
    if !matches!(match_url(&both, &ctx), MatchDecision::Allow(_)) {
        return Err("hand case: exception precedence failed".into());
    }
    Ok(format!("{MATCHER_CASES} cases agree, {hits} matched"))
}

fn check_containments(seed: u64) -> Result<String, String> {
    let mut rng = jsblock_testkit::rng(seed.wrapping_add(1));
    let params = TraceParams::default();
    let mut violations = 0usize;
    for _ in 0..CONTAINMENT_TRACES {
        let labeled = gen_labeled_trace(&mut rng, params);
        let counts = accumulate([&labeled], Attribution::FullStack);
        let cls = classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT);
        let plans: Vec<BlockingPlan> =
            BlockingConfig::ALL_CONFIGS.iter().map(|&c| build_plan(&cls, c)).collect();
        let sets = blocked_request_sets(&labeled, &plans);
        let ok = sets[&BlockingConfig::Ctrl].is_empty()
            && sets[&BlockingConfig::Ts].is_subset(&sets[&BlockingConfig::Tms])
            && sets[&BlockingConfig::Tms].is_subset(&sets[&BlockingConfig::All])
            && sets[&BlockingConfig::Ms].is_subset(&sets[&BlockingConfig::Tms])
            && sets[&BlockingConfig::Tm].is_subset(&sets[&BlockingConfig::Tms]);
        if !ok {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} containment violations"));
    }
    Ok(format!("{CONTAINMENT_TRACES} traces, zero violations"))
}

fn check_sim_oracle(seed: u64) -> Result<String, String> {
    let mut rng = jsblock_testkit::rng(seed.wrapping_add(2));
    let params = TraceParams { max_requests: 20, ..TraceParams::default() };
    for i in 0..ORACLE_TRACES {
        let labeled = gen_labeled_trace(&mut rng, params);
        let counts = accumulate([&labeled], Attribution::FullStack);
        let cls = classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT);
        for config in BlockingConfig::ALL_CONFIGS {
            let plan = build_plan(&cls, config);
            let sim = simulate(&labeled, &plan);
            let expect = oracle_removed(&labeled, &plan);
            if sim.removed_requests != expect {
                return Err(format!("trace {i} config {config}: removal sets/causes differ"));
            }
            if sim.surviving_tags != oracle_surviving_tags(&labeled, &expect) {
                return Err(format!("trace {i} config {config}: tag survival differs"));
            }
        }
    }
    Ok(format!("{ORACLE_TRACES} traces x 6 configs agree exactly"))
}

fn check_metrics_edges() -> Result<String, String> {
    let labeled = &fixtures::tag_manager_labeled_corpus()[0];
    let sim = simulate(labeled, &BlockingPlan::empty(BlockingConfig::Ctrl));
    let diff = diff_requests(labeled, &sim);
    if diff.missing_tracking != 0
        || diff.missing_functional != 0
        || diff.pct_reduction_tracking != 0.0
    {
        return Err("empty-plan diff is not all-zero".into());
    }
    let hist = bin_deciles(&[0.0, 5.0, 10.0, 10.1, 95.0]).map_err(|e| e.to_string())?;
    if hist.bins[0] != 3 || hist.bins[1] != 1 || hist.bins[9] != 1 {
        return Err(format!("edge cases landed in {:?}", hist.bins));
    }
    if hist.total() != 5 {
        return Err("bin sum != site count".into());
    }
    Ok("zero diff and bin edges as pinned".into())
}

fn check_degenerate_thresholds() -> Result<String, String> {
    let corpus = fixtures::tag_manager_labeled_corpus();
    let counts = accumulate(&corpus, Attribution::FullStack);
    let degenerate = Thresholds::new(0.0, 0.0).expect("degenerate pair is allowed");
    let cls = classify_all(&counts, Attribution::FullStack, degenerate);
    let all_mixed = cls.units.values().all(|rec| {
        let both = rec.counts.tracking_count > 0 && rec.counts.functional_count > 0;
        (rec.class == UnitClass::Mixed) == both
    });
    all_mixed
        .then(|| "both-counts-positive units mixed".to_string())
        .ok_or_else(|| "degenerate mode misclassified a unit".into())
}

fn check_label_determinism() -> Result<String, String> {
    let a = fixtures::tag_manager_labeled_corpus();
    let b = fixtures::tag_manager_labeled_corpus();
    let ja: Vec<String> = a.iter().map(|lt| labeled_trace_to_json(lt, Some("x"))).collect();
    let jb: Vec<String> = b.iter().map(|lt| labeled_trace_to_json(lt, Some("x"))).collect();
    (ja == jb)
        .then(|| "byte-identical labeled output".to_string())
        .ok_or_else(|| "labeling is not deterministic".into())
}
