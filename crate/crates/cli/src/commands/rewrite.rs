//! `rewrite`: rename a method definition in one JS file.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};

use jsblock_core::rewrite::rename_method;

use crate::corpus::atomic_write;
use crate::{CmdError, CmdResult, GlobalOpts};

pub fn run(
    globals: &GlobalOpts,
    script: &Path,
    method: &str,
    replacement: &str,
    in_place: bool,
    json_summary: bool,
) -> CmdResult {
    let source = fs::read_to_string(script)
        .with_context(|| format!("reading script {}", script.display()))?;
    let outcome = rename_method(&source, method, replacement)?;

    if json_summary {
        let unsupported: Vec<Value> = outcome
            .unsupported_sites
            .iter()
            .map(|u| json!({"method_name": u.method_name, "offset": u.offset, "reason": u.reason}))
            .collect();
        let summary = json!({
            "script": script.display().to_string(),
            "method": method,
            "replacement": replacement,
            "sites_renamed": outcome.sites_renamed,
            "unsupported_sites": unsupported,
            "bytes_before": source.len(),
            "bytes_after": outcome.source.len(),
        });
        println!("{summary}");
    } else {
        for u in &outcome.unsupported_sites {
            eprintln!(
                "warning: {} at byte {} not renamed ({})",
                u.method_name, u.offset, u.reason
            );
        }
        eprintln!("renamed {} definition site(s) of {method:?}", outcome.sites_renamed);
    }

    if outcome.sites_renamed == 0 {
        return Err(CmdError::NothingRenamed);
    }
    if in_place {
        atomic_write(script, outcome.source.as_bytes())?;
    } else if let Some(out) = &globals.out {
        atomic_write(out, outcome.source.as_bytes())?;
    } else if !json_summary {
        print!("{}", outcome.source);
    }
    Ok(())
}
