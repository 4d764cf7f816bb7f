//! `label`: parse lists and traces, write the labeled corpus.

use std::fs;

use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use jsblock_core::export::{labeled_trace_to_json, write_labels_csv};
use jsblock_core::filter::{parse_lists, FilterSet, ParseReport};
use jsblock_core::label::{label_trace, LabeledTrace};
use jsblock_core::psl::PublicSuffixList;
use jsblock_core::trace::strip_script_queries;

use crate::corpus::{atomic_write, load_traces, read_corpus_documents};
use crate::manifest::{hash_corpus, hash_file, ConfigEcho, CorpusEntry, RunManifest};
use crate::{CmdError, CmdResult, GlobalOpts};

pub fn run(globals: &GlobalOpts, normalize_query: bool) -> CmdResult {
    let traces_dir = globals.traces_dir()?;
    let out_dir = globals.out_dir()?.clone();
    let thresholds = globals.thresholds()?;
    let configs = globals.configs()?;

    let mut filter_entries = Vec::new();
    let mut list_texts = Vec::new();
    for path in &globals.filters {
        filter_entries.push(hash_file(path)?);
        let name = filter_entries.last().unwrap().path.clone();
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading filter list {}", path.display()))?;
        list_texts.push((name, text));
    }
    if list_texts.is_empty() {
        warn!("no filter lists given; every request will be labeled functional");
    }
    let (set, report) =
        parse_lists(list_texts.iter().map(|(n, t)| (n.as_str(), t.as_str())));
    info!(
        "filter lists: {} rules accepted, {} skipped, {} rejected",
        report.accepted,
        report.skipped_total(),
        report.rejected.len()
    );
    for (line_no, opt) in &report.skipped_unsupported {
        warn!("line {line_no}: skipped rule with unsupported option {opt:?}");
    }
    for reject in &report.rejected {
        warn!("line {}: rejected: {} ({})", reject.line_no, reject.text, reject.reason);
    }

    let documents = read_corpus_documents(traces_dir)?;
    if documents.is_empty() {
        return Err(CmdError::Data(anyhow!("no traces found in {}", traces_dir.display())));
    }
    let corpus_hash = hash_corpus(&documents);
    let mut traces = load_traces(&documents)?;
    if normalize_query {
        for st in &mut traces {
            strip_script_queries(&mut st.trace);
        }
    }

    let manifest = RunManifest::build(
        filter_entries,
        CorpusEntry {
            dir: traces_dir.display().to_string(),
            files: documents.len(),
            sha256: corpus_hash,
        },
        ConfigEcho {
            attribution: jsblock_core::trace::Attribution::from(globals.attribution).to_string(),
            thresholds: [thresholds.lower, thresholds.upper],
            configs: configs.iter().map(|c| c.to_string()).collect(),
            seed: globals.seed,
            normalize_query,
        },
    );
    fs::create_dir_all(&out_dir)?;
    manifest.save(&out_dir)?;
    write_lists_report(&out_dir, &report)?;

    let psl = PublicSuffixList::bundled();
    let pool = globals.thread_pool()?;
    let labeled: Vec<(String, LabeledTrace)> = pool.install(|| {
        traces
            .par_iter()
            .map(|st| (st.site.clone(), label_with(&st.trace, &set, psl)))
            .collect()
    });

    for (site, lt) in &labeled {
        let json = labeled_trace_to_json(lt, Some(&manifest.manifest_id));
        atomic_write(&out_dir.join("labeled").join(format!("{site}.json")), json.as_bytes())?;
        let mut csv_buf = Vec::new();
        write_labels_csv(&mut csv_buf, lt).map_err(|e| CmdError::Data(e.into()))?;
        atomic_write(&out_dir.join("labels").join(format!("{site}.csv")), &csv_buf)?;
    }
    info!("labeled {} traces under manifest {}", labeled.len(), manifest.manifest_id);
    Ok(())
}

fn label_with(
    trace: &jsblock_core::trace::PageTrace,
    set: &FilterSet,
    psl: &PublicSuffixList,
) -> LabeledTrace {
    label_trace(trace, set, psl)
}

fn write_lists_report(out_dir: &std::path::Path, report: &ParseReport) -> CmdResult {
    let rejected: Vec<Value> = report
        .rejected
        .iter()
        .map(|r| json!({"line_no": r.line_no, "text": r.text, "reason": r.reason}))
        .collect();
    let unsupported: Vec<Value> = report
        .skipped_unsupported
        .iter()
        .map(|(line_no, opt)| json!({"line_no": line_no, "option": opt}))
        .collect();
    let value = json!({
        "accepted": report.accepted,
        "skipped": {
            "blank": report.skipped_blank,
            "comments": report.skipped_comments,
            "cosmetic": report.skipped_cosmetic,
            "regex": report.skipped_regex,
            "unsupported_option": unsupported,
        },
        "rejected": rejected,
    });
    atomic_write(&out_dir.join("lists_report.json"), value.to_string().as_bytes())?;
    Ok(())
}
