//! Engine-vs-oracle agreement and precedence monotonicity for the
//! filter matcher, over seeded generated suites.

use jsblock_core::filter::{match_url, parse_list, rule_matches, FilterSet, MatchDecision};
use jsblock_testkit::gen::gen_match_case;
use jsblock_testkit::match_oracle::{oracle_decision, oracle_rule_matches};
use jsblock_testkit::{rng, Rng};

#[test]
fn engine_agrees_with_reference_matcher() {
    let mut rng = rng(0xF117E);
    let mut hits = 0usize;
    const CASES: usize = 10_000;
    for i in 0..CASES {
        let case = gen_match_case(&mut rng);
        let (set, report) = parse_list(&case.rule_line, "gen");
        assert!(
            report.rejected.is_empty() && set.rule_count() == 1,
            "case {i}: rule {:?} did not parse cleanly",
            case.rule_line
        );
        let rule = set.block_rules.first().or(set.exception_rules.first()).unwrap();
        let engine = rule_matches(rule, &case.ctx);
        let oracle = oracle_rule_matches(rule, &case.ctx);
        assert_eq!(
            engine, oracle,
            "case {i}: rule {:?} vs url {:?}",
            case.rule_line, case.ctx.request_url
        );
        hits += engine as usize;
    }
    assert!(hits > CASES / 20, "only {hits} matches; generator drifted");
    println!("filter oracle: {CASES} cases agree ({hits} matched)");
}

#[test]
fn whole_set_decisions_agree_with_oracle() {
    let mut rng = rng(0x5E7D);
    for _ in 0..1_500 {
        let n_rules = 1 + rng.gen_range(0..4);
        let mut lines = Vec::new();
        let mut ctx = None;
        for _ in 0..n_rules {
            let case = gen_match_case(&mut rng);
            lines.push(case.rule_line);
            ctx.get_or_insert(case.ctx);
        }
        let text = lines.join("\n");
        let (set, _) = parse_list(&text, "gen");
        let ctx = ctx.unwrap();
        let engine = match match_url(&set, &ctx) {
            MatchDecision::Allow(_) => "allow",
            MatchDecision::Block(_) => "block",
            MatchDecision::NoMatch => "none",
        };
        assert_eq!(engine, oracle_decision(&set, &ctx), "rules: {text:?} url {:?}", ctx.request_url);
    }
}

/// Adding a block rule never converts Block into NoMatch; adding an
/// exception never converts Allow into Block.
#[test]
fn precedence_monotonicity() {
    let mut rng = rng(0xB10C);
    for _ in 0..1_500 {
        let base_case = gen_match_case(&mut rng);
        let extra_case = gen_match_case(&mut rng);
        let (mut set, _) = parse_list(&base_case.rule_line, "gen");
        let before = decision_kind(&set, &base_case);

        let (extra_set, _) = parse_list(extra_case.rule_line.trim_start_matches("@@"), "gen");
        if let Some(block) = extra_set.block_rules.into_iter().next() {
            set.block_rules.push(block);
        }
        let after_block = decision_kind(&set, &base_case);
        if before == "block" {
            assert_eq!(after_block, "block", "block rule flipped a block decision");
        }
        if before == "allow" {
            assert_eq!(after_block, "allow", "exceptions must keep winning");
        }

        let (mut exc_set, _) = parse_list(&format!("@@{}", extra_case.rule_line.trim_start_matches("@@")), "gen");
        set.exception_rules.append(&mut exc_set.exception_rules);
        let after_exception = decision_kind(&set, &base_case);
        if after_block == "allow" {
            assert_eq!(after_exception, "allow", "adding an exception dropped an allow");
        }
        assert!(
            !(after_block != "block" && after_exception == "block"),
            "adding an exception created a block"
        );
    }
}

fn decision_kind(set: &FilterSet, case: &jsblock_testkit::gen::MatchCase) -> &'static str {
    match match_url(set, &case.ctx) {
        MatchDecision::Allow(_) => "allow",
        MatchDecision::Block(_) => "block",
        MatchDecision::NoMatch => "none",
    }
}
