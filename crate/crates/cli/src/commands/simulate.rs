//! `simulate`: replay the labeled corpus under each plan, diff against
//! control, and check the configuration containments per trace.

use std::collections::BTreeMap;
use std::fs;

use anyhow::anyhow;
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{Map, Value};

use jsblock_core::export::{plan_from_json, simulation_to_json, write_site_diffs_csv};
use jsblock_core::label::LabeledTrace;
use jsblock_core::metrics::{diff_requests, diff_tags, SiteDiff};
use jsblock_core::sim::{
    simulate_with_mode, BlockingConfig, BlockingPlan, MethodMatchMode, SimulatedTrace,
};

use crate::corpus::{atomic_write, load_labeled_corpus};
use crate::manifest::RunManifest;
use crate::{CmdError, CmdResult, GlobalOpts};

pub fn run(globals: &GlobalOpts, method_match: MethodMatchMode) -> CmdResult {
    let out_dir = globals.out_dir()?.clone();
    let configs = globals.configs()?;
    let manifest = RunManifest::load(&out_dir)?;

    let mut plans: Vec<BlockingPlan> = Vec::new();
    for config in &configs {
        let path = out_dir.join("plans").join(format!("{config}.json"));
        let text = fs::read_to_string(&path).map_err(|e| {
            CmdError::Data(anyhow!("reading {}: {e} (run `plan` first)", path.display()))
        })?;
        let plan = plan_from_json(&text).map_err(|e| CmdError::Data(e.into()))?;
        if plan.config != *config {
            return Err(CmdError::Data(anyhow!(
                "{} declares config {}, expected {config}",
                path.display(),
                plan.config
            )));
        }
        plans.push(plan);
    }

    let corpus = load_labeled_corpus(&out_dir)?;
    for (site, _, id) in &corpus {
        manifest
            .check_artifact(&out_dir.join("labeled").join(format!("{site}.json")), id.as_deref())?;
    }

    let pool = globals.thread_pool()?;
    type SiteResult = (String, Vec<(BlockingConfig, SimulatedTrace, SiteDiff)>);
    let results: Vec<SiteResult> = pool.install(|| {
        corpus
            .par_iter()
            .map(|(site, labeled, _)| {
                let per_config = plans
                    .iter()
                    .map(|plan| {
                        let sim = simulate_with_mode(labeled, plan, method_match);
                        let diff = SiteDiff {
                            site: site.clone(),
                            requests: diff_requests(labeled, &sim),
                            tags: diff_tags(&labeled.trace, &labeled.labels, &sim),
                        };
                        (plan.config, sim, diff)
                    })
                    .collect();
                (site.clone(), per_config)
            })
            .collect()
    });

    let mut diff_rows: Vec<(String, BlockingConfig, SiteDiff)> = Vec::new();
    let mut containment_rows: Vec<(String, BTreeMap<&'static str, bool>)> = Vec::new();
    for (site, per_config) in &results {
        let labeled = &corpus.iter().find(|(s, _, _)| s == site).expect("site present").1;
        for (config, sim, diff) in per_config {
            let json = simulation_to_json(site, labeled, sim, Some(&manifest.manifest_id));
            atomic_write(
                &out_dir.join("sim").join(config.to_string()).join(format!("{site}.json")),
                json.as_bytes(),
            )?;
            diff_rows.push((site.clone(), *config, diff.clone()));
        }
        if let Some(checks) = containments(per_config, labeled) {
            for (name, ok) in &checks {
                if !ok {
                    warn!("containment {name} violated on {site}");
                }
            }
            containment_rows.push((site.clone(), checks));
        }
    }

    let meta_id = manifest.manifest_id.clone();
    let mode_str = match method_match {
        MethodMatchMode::AnyFrame => "any_frame",
        MethodMatchMode::TopFrameOnly => "top_frame_only",
    };
    let mut csv_buf = Vec::new();
    write_site_diffs_csv(
        &mut csv_buf,
        &diff_rows,
        &[("manifest_id", &meta_id), ("method_match", mode_str)],
    )
    .map_err(|e| CmdError::Data(e.into()))?;
    atomic_write(&out_dir.join("diffs.csv"), &csv_buf)?;
    write_diffs_json(&out_dir, &diff_rows, &meta_id, mode_str)?;
    write_containments_csv(&out_dir, &containment_rows, &meta_id)?;
    info!("simulated {} traces x {} configs", results.len(), plans.len());
    Ok(())
}

/// Containment checks over independently recomputed removal sets; only
/// emitted when every config a relation needs was simulated.
fn containments(
    per_config: &[(BlockingConfig, SimulatedTrace, SiteDiff)],
    _labeled: &LabeledTrace,
) -> Option<BTreeMap<&'static str, bool>> {
    let removed = |c: BlockingConfig| {
        per_config.iter().find(|(cc, _, _)| *cc == c).map(|(_, sim, _)| sim.removed_ids())
    };
    let mut checks = BTreeMap::new();
    if let Some(ctrl) = removed(BlockingConfig::Ctrl) {
        checks.insert("ctrl_empty", ctrl.is_empty());
    }
    if let (Some(ts), Some(tms)) = (removed(BlockingConfig::Ts), removed(BlockingConfig::Tms)) {
        checks.insert("ts_subset_tms", ts.is_subset(&tms));
    }
    if let (Some(tms), Some(all)) = (removed(BlockingConfig::Tms), removed(BlockingConfig::All)) {
        checks.insert("tms_subset_all", tms.is_subset(&all));
    }
    if let (Some(ms), Some(tms)) = (removed(BlockingConfig::Ms), removed(BlockingConfig::Tms)) {
        checks.insert("ms_subset_tms", ms.is_subset(&tms));
    }
    if let (Some(tm), Some(tms)) = (removed(BlockingConfig::Tm), removed(BlockingConfig::Tms)) {
        checks.insert("tm_subset_tms", tm.is_subset(&tms));
    }
    (!checks.is_empty()).then_some(checks)
}

fn write_diffs_json(
    out_dir: &std::path::Path,
    rows: &[(String, BlockingConfig, SiteDiff)],
    manifest_id: &str,
    method_match: &str,
) -> CmdResult {
    let sites: Vec<Value> = rows
        .iter()
        .map(|(site, config, diff)| {
            let mut obj = Map::new();
            obj.insert("site".into(), Value::String(site.clone()));
            obj.insert("config".into(), Value::String(config.to_string()));
            obj.insert(
                "requests".into(),
                serde_json::to_value(diff.requests).expect("diff serializes"),
            );
            obj.insert("tags".into(), serde_json::to_value(&diff.tags).expect("tags serialize"));
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    root.insert("manifest_id".into(), Value::String(manifest_id.to_string()));
    root.insert("method_match".into(), Value::String(method_match.to_string()));
    root.insert("diffs".into(), Value::Array(sites));
    atomic_write(&out_dir.join("diffs.json"), Value::Object(root).to_string().as_bytes())?;
    Ok(())
}

fn write_containments_csv(
    out_dir: &std::path::Path,
    rows: &[(String, BTreeMap<&'static str, bool>)],
    manifest_id: &str,
) -> CmdResult {
    if rows.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    jsblock_core::export::write_meta(&mut buf, &[("manifest_id", manifest_id)])
        .map_err(|e| CmdError::Data(e.into()))?;
    let mut out = csv::Writer::from_writer(&mut buf);
    let columns: Vec<&str> = rows[0].1.keys().copied().collect();
    let mut header = vec!["site"];
    header.extend(&columns);
    out.write_record(&header).map_err(|e| CmdError::Data(e.into()))?;
    for (site, checks) in rows {
        let mut record = vec![site.clone()];
        for col in &columns {
            record.push(checks.get(col).map(|b| b.to_string()).unwrap_or_default());
        }
        out.write_record(&record).map_err(|e| CmdError::Data(e.into()))?;
    }
    out.flush().map_err(|e| CmdError::Data(e.into()))?;
    drop(out);
    atomic_write(&out_dir.join("containments.csv"), &buf)?;
    Ok(())
}
