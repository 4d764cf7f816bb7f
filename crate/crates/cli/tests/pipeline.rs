//! CLI behavior: exit codes, artifact shapes, flag handling, and the
//! manifest chain.

mod common;

use std::fs;

use common::*;
use jsblock_core::metrics::DECILE_LABELS;

#[test]
fn label_csv_row_count_equals_request_count() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    let csv = read(&out.join("labels").join("tag-site.csv"));
    let rows = csv_data_rows(&csv);
    let tag_site = &jsblock_core::fixtures::tag_manager_corpus()[0];
    assert_eq!(rows.len(), tag_site.requests.len());
    // re-run is byte-identical
    let before_labeled = read(&out.join("labeled").join("tag-site.json"));
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    assert_eq!(read(&out.join("labels").join("tag-site.csv")), csv);
    assert_eq!(read(&out.join("labeled").join("tag-site.json")), before_labeled);
}

#[test]
fn localize_outputs_fixture_classes() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    let csv = read(&out.join("classification.csv"));
    assert!(csv.contains("script,https://tags.site.example/utag.js,,132,160,-0.083546,mixed"));
    assert!(csv.contains("method,https://tags.site.example/utag.js,loader,131,1,2.117271,tracking"));
    assert!(csv.contains("method,https://tags.site.example/utag.js,fireCORS,1,159,-2.201397,functional"));
}

#[test]
fn attribution_flag_changes_counts_not_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    run_ok(jsblock().args(["--out", &out.display().to_string()]).arg("localize"));
    let full = read(&out.join("classification.csv"));
    run_ok(jsblock()
        .args(["--out", &out.display().to_string()])
        .args(["--attribution", "top-frame"])
        .arg("localize"));
    let top = read(&out.join("classification.csv"));
    let header = |text: &str| {
        text.lines().find(|l| !l.starts_with('#')).map(str::to_string).unwrap_or_default()
    };
    assert_eq!(header(&full), header(&top), "schema must not change");
    // the app-bundle deep stack gives full-stack extra participations
    assert_ne!(full, top, "attribution must be reflected in the data");
    assert!(top.contains("# attribution=top_frame"));
}

#[test]
fn degenerate_thresholds_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    run_ok(jsblock()
        .args(["--out", &out.display().to_string()])
        .args(["--thresholds", "0", "0"])
        .arg("localize"));
    let csv = read(&out.join("classification.csv"));
    assert!(csv.contains("script,https://tags.site.example/utag.js,,132,160,-0.083546,mixed"));
    assert!(csv.contains("method,https://tags.site.example/utag.js,loader,131,1,2.117271,mixed"));
    assert!(csv.contains("method,https://tags.site.example/utag.js,fireCORS,1,159,-2.201397,mixed"));
}

#[test]
fn simulate_one_diff_row_per_site_config_and_ctrl_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    let rows = csv_data_rows(&read(&out.join("diffs.csv")));
    assert_eq!(rows.len(), 3 * 6, "3 sites x 6 configs");
    let mut seen = std::collections::BTreeSet::new();
    for row in &rows {
        assert!(seen.insert((row[0].clone(), row[1].clone())), "duplicate (site, config) row");
        if row[1] == "CTRL" {
            assert!(
                row[4] == "0" && row[5] == "0" && row[6] == "0.00" && row[7] == "0.00",
                "CTRL diff must be all-zero: {row:?}"
            );
        }
    }
    let containments = read(&out.join("containments.csv"));
    for row in csv_data_rows(&containments) {
        assert!(row[1..].iter().all(|v| v == "true"), "containment violated: {row:?}");
    }
}

#[test]
fn deciles_have_exact_bin_labels_and_manifest_header() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    let manifest = read(&out.join("manifest.json"));
    let manifest_id = manifest
        .split("\"manifest_id\":\"")
        .nth(1)
        .and_then(|rest| rest.split('"').next())
        .unwrap()
        .to_string();
    for config in ["CTRL", "ALL", "TS", "MS", "TMS", "TM"] {
        let text = read(&out.join(format!("deciles_{config}.csv")));
        assert!(text.starts_with(&format!("# manifest_id={manifest_id}\n")));
        let labels: Vec<String> =
            csv_data_rows(&text).iter().map(|row| row[0].clone()).collect();
        assert_eq!(labels, DECILE_LABELS.to_vec());
    }
    for report in ["corpus_summary.csv", "top_units.csv", "diffs.csv", "classification.csv"] {
        assert!(
            read(&out.join(report)).contains(&format!("# manifest_id={manifest_id}")),
            "{report} missing manifest header"
        );
    }
}

#[test]
fn report_refuses_mixed_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    let cls_path = out.join("classification.json");
    let tampered = read(&cls_path).replace(
        &format!("\"manifest_id\":\"{}\"", manifest_id_of(&out)),
        "\"manifest_id\":\"0000000000000000\"",
    );
    fs::write(&cls_path, tampered).unwrap();
    let code = exit_code(jsblock().args(["--out", &out.display().to_string()]).arg("report"));
    assert_eq!(code, 4, "mixed manifests must be a data error");
}

fn manifest_id_of(out: &std::path::Path) -> String {
    read(&out.join("manifest.json"))
        .split("\"manifest_id\":\"")
        .nth(1)
        .and_then(|rest| rest.split('"').next())
        .unwrap()
        .to_string()
}

#[test]
fn annotations_aggregate_through_report() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    fs::write(
        out.join("annotations.csv"),
        "site,config,category,severity,note\n\
         a.example,TMS,appearance,minor,white space\n\
         b.example,TMS,appearance,minor,\n\
         c.example,TMS,appearance,minor,gap\n\
         a.example,TM,appearance,none,\n",
    )
    .unwrap();
    run_ok(jsblock().args(["--out", &out.display().to_string()]).arg("report"));
    let summary = read(&out.join("annotation_summary.csv"));
    assert!(summary.contains("TMS,appearance,minor,3"));
    assert!(summary.contains("TM,appearance,none,1"));

    // duplicate (site, config, category) must fail the report
    fs::write(
        out.join("annotations.csv"),
        "site,config,category,severity,note\n\
         a.example,TMS,appearance,minor,\n\
         a.example,TMS,appearance,major,\n",
    )
    .unwrap();
    let code = exit_code(jsblock().args(["--out", &out.display().to_string()]).arg("report"));
    assert_eq!(code, 4);
}

#[test]
fn method_match_top_frame_is_narrower() {
    let dir = tempfile::tempdir().unwrap();
    let (traces, list) = write_fixture_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&traces, &list, &out);
    let removed_tm = |text: &str| {
        csv_data_rows(text)
            .iter()
            .filter(|row| row[1] == "TM")
            .map(|row| row[4].parse::<u64>().unwrap() + row[5].parse::<u64>().unwrap())
            .sum::<u64>()
    };
    let any_frame = removed_tm(&read(&out.join("diffs.csv")));
    run_ok(jsblock()
        .args(["--out", &out.display().to_string()])
        .args(["simulate", "--method-match", "top-frame"]));
    let diffs = read(&out.join("diffs.csv"));
    assert!(diffs.contains("# method_match=top_frame_only"));
    let top_frame = removed_tm(&diffs);
    // the app bundle has a request with the blocked method mid-stack
    assert!(top_frame < any_frame, "top-frame {top_frame} vs any-frame {any_frame}");
}

#[test]
fn normalize_query_collapses_script_identities() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    fs::create_dir_all(&traces).unwrap();
    let trace = r#"{"page_url":"https://a.example/","requests":[
        {"request_id":"r0","url":"https://a.example/x","resource_kind":"xhr",
         "stack":[{"script_url":"https://a.example/app.js?v=1","method_name":"f","line":1,"column":1}]},
        {"request_id":"r1","url":"https://a.example/y","resource_kind":"xhr",
         "stack":[{"script_url":"https://a.example/app.js?v=2","method_name":"f","line":1,"column":1}]}
    ],"tags":[]}"#;
    fs::write(traces.join("site.json"), trace).unwrap();
    let list = dir.path().join("lists.txt");
    fs::write(&list, "||tracker.example^\n").unwrap();
    let out = dir.path().join("out");
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .args(["label", "--normalize-query"]));
    run_ok(jsblock().args(["--out", &out.display().to_string()]).arg("localize"));
    let csv = read(&out.join("classification.csv"));
    // the two query-varying frames collapse into a single script unit
    assert!(csv.contains("script,https://a.example/app.js,,0,2,-inf,functional"));
    assert!(!csv.contains("app.js?v="));
}

#[test]
fn jsonl_corpus_streams() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    fs::create_dir_all(&traces).unwrap();
    let t1 = r#"{"page_url":"https://one.example/","requests":[],"tags":[]}"#;
    let t2 = r#"{"page_url":"https://two.example/","requests":[],"tags":[]}"#;
    fs::write(traces.join("stream.jsonl"), format!("{t1}\n{t2}\n")).unwrap();
    let list = dir.path().join("lists.txt");
    fs::write(&list, "||tracker.example^\n").unwrap();
    let out = dir.path().join("out");
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    assert!(out.join("labeled").join("stream-0001.json").exists());
    assert!(out.join("labeled").join("stream-0002.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // 4: empty trace dir
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let list = dir.path().join("lists.txt");
    fs::write(&list, "||t.example^\n").unwrap();
    let out = dir.path().join("out");
    let mut cmd = jsblock();
    cmd.args(["--traces", &empty.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label");
    let output = cmd.output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no traces found"));

    // 4: malformed trace
    let bad = dir.path().join("bad");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("x.json"), "{not json").unwrap();
    let code = exit_code(jsblock()
        .args(["--traces", &bad.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .arg("label"));
    assert_eq!(code, 4);

    // 2: bad thresholds
    let code = exit_code(jsblock()
        .args(["--out", &out.display().to_string()])
        .args(["--thresholds", "2", "-2"])
        .arg("localize"));
    assert_eq!(code, 2);

    // 2: unknown subcommand (clap)
    let code = exit_code(jsblock().arg("frobnicate"));
    assert_eq!(code, 2);

    // 3: rewrite with nothing to rename
    let js = dir.path().join("a.js");
    fs::write(&js, "v = function(){}").unwrap();
    let code = exit_code(jsblock()
        .args(["rewrite", "--script", &js.display().to_string(), "--method", "nosuch"]));
    assert_eq!(code, 3);

    // 0: rewrite that renames, writing to --out
    let blocked = dir.path().join("a_blocked.js");
    run_ok(jsblock()
        .args(["--out", &blocked.display().to_string()])
        .args(["rewrite", "--script", &js.display().to_string(), "--method", "v", "--json"]));
    assert!(read(&blocked).contains("doNotExecuteMe = function"));
}

#[test]
fn selftest_passes_and_prints_lines() {
    let output = run_ok(jsblock().args(["--seed", "7"]).arg("selftest"));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches(": PASS").count(), 10, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}
