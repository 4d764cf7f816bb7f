//! Shared helpers for the CLI test suites.
// Each integration test binary compiles this module separately and uses
// a different subset of it.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsblock_core::fixtures;
use jsblock_core::trace::serialize_trace;

pub const EPOCH: &str = "1726000000";

/// The built `jsblock` binary with a pinned timestamp source.
pub fn jsblock() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jsblock"));
    cmd.env("SOURCE_DATE_EPOCH", EPOCH);
    cmd
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn jsblock");
    assert!(
        output.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

pub fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("spawn jsblock").status.code().unwrap_or(-1)
}

/// Write the bundled fixture corpus and filter list into `dir`.
/// Returns (traces_dir, list_path).
pub fn write_fixture_corpus(dir: &Path) -> (PathBuf, PathBuf) {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).unwrap();
    let tag_site = &fixtures::tag_manager_corpus()[0];
    fs::write(traces.join("tag-site.json"), serialize_trace(tag_site)).unwrap();
    fs::write(
        traces.join("app-bundle.json"),
        serialize_trace(&fixtures::app_bundle_labeled_trace().trace),
    )
    .unwrap();
    fs::write(traces.join("fetch-chain.json"), serialize_trace(&fixtures::fetch_chain_trace()))
        .unwrap();
    let list = dir.join("lists.txt");
    fs::write(&list, fixtures::FIXTURE_FILTER_LIST).unwrap();
    (traces, list)
}

/// label → localize → plan → simulate → report into `out`.
pub fn run_pipeline(traces: &Path, list: &Path, out: &Path) {
    run_pipeline_with(traces, list, out, &[]);
}

pub fn run_pipeline_with(traces: &Path, list: &Path, out: &Path, extra: &[&str]) {
    run_ok(jsblock()
        .args(["--traces", &traces.display().to_string()])
        .args(["--filters", &list.display().to_string()])
        .args(["--out", &out.display().to_string()])
        .args(extra)
        .arg("label"));
    for sub in ["localize", "plan", "simulate", "report"] {
        run_ok(jsblock()
            .args(["--out", &out.display().to_string()])
            .args(extra)
            .arg(sub));
    }
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Data rows of a CSV file: skips `#` comment lines and the header.
pub fn csv_data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
