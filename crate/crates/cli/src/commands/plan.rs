//! `plan`: resolve configurations into blocked-unit sets on disk.

use std::fs;

use log::info;

use jsblock_core::export::{classification_from_json, plan_to_json};
use jsblock_core::sim::build_plan;

use crate::corpus::atomic_write;
use crate::manifest::RunManifest;
use crate::{CmdError, CmdResult, GlobalOpts};

pub fn run(globals: &GlobalOpts) -> CmdResult {
    let out_dir = globals.out_dir()?.clone();
    let configs = globals.configs()?;
    let manifest = RunManifest::load(&out_dir)?;

    let cls_path = out_dir.join("classification.json");
    let text = fs::read_to_string(&cls_path)
        .map_err(|e| CmdError::Data(anyhow::anyhow!("reading {}: {e} (run `localize` first)", cls_path.display())))?;
    let (cls, cls_id) =
        classification_from_json(&text).map_err(|e| CmdError::Data(e.into()))?;
    manifest.check_artifact(&cls_path, cls_id.as_deref())?;

    for config in configs {
        let plan = build_plan(&cls, config);
        let json = plan_to_json(&plan).map_err(|e| CmdError::Data(e.into()))?;
        atomic_write(&out_dir.join("plans").join(format!("{config}.json")), json.as_bytes())?;
        info!(
            "{config}: {} blocked scripts, {} blocked methods",
            plan.blocked_scripts.len(),
            plan.blocked_methods.len()
        );
    }
    Ok(())
}
