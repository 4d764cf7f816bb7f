//! `report`: corpus summaries, decile histograms, top units, and
//! annotation aggregates, all stamped with the manifest id.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::anyhow;
use log::info;
use serde_json::Value;

use jsblock_core::export::{
    classification_from_json, read_annotations_csv, write_annotation_summary_csv,
    write_corpus_summary_csv, write_deciles_csv, write_top_units_csv,
};
use jsblock_core::metrics::{
    aggregate_annotations, corpus_report, top_units_report, RequestDiff, SiteDiff, TagDiff,
};
use jsblock_core::psl::PublicSuffixList;
use jsblock_core::sim::BlockingConfig;
use jsblock_core::trace::{units_of, CodeUnitId};

use crate::corpus::{atomic_write, load_labeled_corpus};
use crate::manifest::RunManifest;
use crate::{CmdError, CmdResult, GlobalOpts};

/// Decile bin-edge rule, flagged in report metadata.
const BIN_EDGE_NOTE: &str = "zero-in-first;(10k,10k+10]";

pub fn run(globals: &GlobalOpts, annotations: Option<&Path>) -> CmdResult {
    let out_dir = globals.out_dir()?.clone();
    let manifest = RunManifest::load(&out_dir)?;
    let meta_id = manifest.manifest_id.clone();
    let meta: Vec<(&str, &str)> = vec![("manifest_id", &meta_id)];

    // diffs.json: per (site, config) diff pairs from the simulate stage.
    let diffs_path = out_dir.join("diffs.json");
    let text = fs::read_to_string(&diffs_path).map_err(|e| {
        CmdError::Data(anyhow!("reading {}: {e} (run `simulate` first)", diffs_path.display()))
    })?;
    let root: Value = serde_json::from_str(&text).map_err(|e| CmdError::Data(e.into()))?;
    manifest.check_artifact(&diffs_path, root.get("manifest_id").and_then(Value::as_str))?;
    let mut per_config: BTreeMap<BlockingConfig, Vec<SiteDiff>> = BTreeMap::new();
    for entry in root.get("diffs").and_then(Value::as_array).into_iter().flatten() {
        let site = entry
            .get("site")
            .and_then(Value::as_str)
            .ok_or_else(|| CmdError::Data(anyhow!("diff entry missing site")))?;
        let config: BlockingConfig = entry
            .get("config")
            .and_then(Value::as_str)
            .ok_or_else(|| CmdError::Data(anyhow!("diff entry missing config")))?
            .parse()
            .map_err(|e: String| CmdError::Data(anyhow!(e)))?;
        let requests: RequestDiff =
            serde_json::from_value(entry.get("requests").cloned().unwrap_or(Value::Null))
                .map_err(|e| CmdError::Data(e.into()))?;
        let tags: TagDiff =
            serde_json::from_value(entry.get("tags").cloned().unwrap_or(Value::Null))
                .map_err(|e| CmdError::Data(e.into()))?;
        per_config
            .entry(config)
            .or_default()
            .push(SiteDiff { site: site.to_string(), requests, tags });
    }

    let mut summaries = Vec::new();
    for (config, diffs) in &per_config {
        let summary =
            corpus_report(diffs, *config).map_err(|e| CmdError::Data(e.into()))?;
        let mut buf = Vec::new();
        let deciles_meta: Vec<(&str, &str)> =
            vec![("manifest_id", &meta_id), ("bin_edges", BIN_EDGE_NOTE)];
        write_deciles_csv(
            &mut buf,
            &summary.deciles_tracking,
            &summary.deciles_functional,
            &deciles_meta,
        )
        .map_err(|e| CmdError::Data(e.into()))?;
        atomic_write(&out_dir.join(format!("deciles_{config}.csv")), &buf)?;
        summaries.push(summary);
    }
    let mut buf = Vec::new();
    write_corpus_summary_csv(&mut buf, &summaries, &meta).map_err(|e| CmdError::Data(e.into()))?;
    atomic_write(&out_dir.join("corpus_summary.csv"), &buf)?;

    // Top units over the labeled corpus, restricted to classified units.
    let cls_path = out_dir.join("classification.json");
    let cls_text = fs::read_to_string(&cls_path).map_err(|e| {
        CmdError::Data(anyhow!("reading {}: {e} (run `localize` first)", cls_path.display()))
    })?;
    let (cls, cls_id) = classification_from_json(&cls_text).map_err(|e| CmdError::Data(e.into()))?;
    manifest.check_artifact(&cls_path, cls_id.as_deref())?;
    let corpus = load_labeled_corpus(&out_dir)?;
    let mut presence: BTreeMap<String, BTreeSet<CodeUnitId>> = BTreeMap::new();
    for (site, labeled, id) in &corpus {
        manifest
            .check_artifact(&out_dir.join("labeled").join(format!("{site}.json")), id.as_deref())?;
        let units = presence.entry(site.clone()).or_default();
        for req in &labeled.trace.requests {
            units.extend(units_of(req, cls.attribution));
        }
    }
    let rows = top_units_report(&cls, &presence, PublicSuffixList::bundled());
    let mut buf = Vec::new();
    write_top_units_csv(&mut buf, &rows, &meta).map_err(|e| CmdError::Data(e.into()))?;
    atomic_write(&out_dir.join("top_units.csv"), &buf)?;

    // Annotations are optional: an explicit file, or annotations.csv in
    // the output directory.
    let annotation_path = annotations
        .map(Path::to_path_buf)
        .or_else(|| {
            let default = out_dir.join("annotations.csv");
            default.exists().then_some(default)
        });
    if let Some(path) = annotation_path {
        let text = fs::read_to_string(&path)
            .map_err(|e| CmdError::Data(anyhow!("reading {}: {e}", path.display())))?;
        let records = read_annotations_csv(&text).map_err(|e| CmdError::Data(e.into()))?;
        let table = aggregate_annotations(&records).map_err(|e| CmdError::Data(e.into()))?;
        let mut buf = Vec::new();
        write_annotation_summary_csv(&mut buf, &table, &meta)
            .map_err(|e| CmdError::Data(e.into()))?;
        atomic_write(&out_dir.join("annotation_summary.csv"), &buf)?;
        info!("aggregated {} annotations", records.len());
    }

    info!("reports written for {} configurations", summaries.len());
    Ok(())
}
