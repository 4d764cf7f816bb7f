//! Corpus IO: trace loading, labeled-corpus loading, atomic writes.
//!
//! A corpus is a directory of `.json` trace files (one page load each)
//! or `.jsonl` files (one trace per line). Site ids are file stems,
//! with a line suffix for stream entries; files are processed in name
//! order so every downstream artifact is deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use jsblock_core::export::labeled_trace_from_json;
use jsblock_core::label::LabeledTrace;
use jsblock_core::trace::{parse_trace, PageTrace};

/// One loaded page trace with its site id.
#[derive(Debug, Clone)]
pub struct SiteTrace {
    pub site: String,
    pub trace: PageTrace,
}

/// Raw corpus documents: (site id, document text), name-ordered.
pub fn read_corpus_documents(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading trace directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut documents = Vec::new();
    for path in entries {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
        match ext {
            "json" => {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                documents.push((stem, text));
            }
            "jsonl" | "ndjson" => {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    documents.push((format!("{stem}-{:04}", i + 1), line.to_string()));
                }
            }
            _ => {}
        }
    }
    Ok(documents)
}

/// Parse every document; any malformed trace fails the run.
pub fn load_traces(documents: &[(String, String)]) -> Result<Vec<SiteTrace>> {
    let mut traces = Vec::with_capacity(documents.len());
    for (site, text) in documents {
        let trace =
            parse_trace(text).map_err(|e| anyhow!("trace {site}: {e}"))?;
        traces.push(SiteTrace { site: site.clone(), trace });
    }
    Ok(traces)
}

/// Load the labeled corpus written by the label stage, with the
/// manifest id each file was stamped with.
pub fn load_labeled_corpus(out_dir: &Path) -> Result<Vec<(String, LabeledTrace, Option<String>)>> {
    let dir = out_dir.join("labeled");
    if !dir.is_dir() {
        bail!("no labeled corpus under {} (run `label` first)", out_dir.display());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    entries.sort();
    let mut corpus = Vec::with_capacity(entries.len());
    for path in entries {
        let site = path.file_stem().and_then(|s| s.to_str()).unwrap_or("site").to_string();
        let text = fs::read_to_string(&path)?;
        let (labeled, manifest_id) = labeled_trace_from_json(&text)
            .map_err(|e| anyhow!("labeled trace {}: {e}", path.display()))?;
        corpus.push((site, labeled, manifest_id));
    }
    Ok(corpus)
}

/// Write-temp-then-rename so readers never observe partial files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
