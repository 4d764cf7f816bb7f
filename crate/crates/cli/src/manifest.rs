//! Run manifests: content hashes of every input plus a config echo.
//!
//! The manifest id covers only reproducible content (tool version, list
//! hashes, corpus hash, config echo) — never the timestamp — so re-runs
//! on identical inputs produce identical ids and byte-identical reports.
//! Derived artifacts carry the id; stages refuse to mix artifacts from
//! different manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FilterListEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorpusEntry {
    pub dir: String,
    pub files: usize,
    pub sha256: String,
}

/// Snapshot of the run configuration at label time.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub attribution: String,
    pub thresholds: [f64; 2],
    pub configs: Vec<String>,
    pub seed: u64,
    pub normalize_query: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub manifest_id: String,
    pub tool_version: String,
    pub filter_lists: Vec<FilterListEntry>,
    pub trace_corpus: CorpusEntry,
    pub config: ConfigEcho,
    /// Informational only; excluded from the id.
    pub created: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Corpus hash: file names and contents, in name order.
pub fn hash_corpus(files: &[(String, String)]) -> String {
    let mut hasher = Sha256::new();
    for (name, content) in files {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(content.as_bytes());
        hasher.update([0u8]);
    }
    let mut out = String::with_capacity(64);
    for b in hasher.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl RunManifest {
    pub fn build(
        filter_lists: Vec<FilterListEntry>,
        trace_corpus: CorpusEntry,
        config: ConfigEcho,
    ) -> Self {
        let mut manifest = RunManifest {
            manifest_id: String::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            filter_lists,
            trace_corpus,
            config,
            created: created_timestamp(),
        };
        manifest.manifest_id = manifest.compute_id();
        manifest
    }

    /// Hash of the deterministic subset, truncated to 16 hex chars.
    fn compute_id(&self) -> String {
        let subset = serde_json::json!({
            "tool_version": self.tool_version,
            "filter_lists": self.filter_lists,
            "trace_corpus": self.trace_corpus,
            "config": self.config,
        });
        // Value maps are ordered, so this rendering is canonical.
        let canonical: Value = serde_json::to_value(&subset).expect("manifest serializes");
        sha256_hex(canonical.to_string().as_bytes())[..16].to_string()
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let value: Value = serde_json::to_value(self)?;
        crate::corpus::atomic_write(&out_dir.join(MANIFEST_FILE), value.to_string().as_bytes())
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        let expect = manifest.compute_id();
        if manifest.manifest_id != expect {
            return Err(anyhow!(
                "manifest id {} does not match its contents (expected {})",
                manifest.manifest_id,
                expect
            ));
        }
        Ok(manifest)
    }

    /// Fail when a derived artifact was produced under another manifest.
    pub fn check_artifact(&self, artifact: &Path, found: Option<&str>) -> Result<()> {
        match found {
            Some(id) if id == self.manifest_id => Ok(()),
            Some(id) => Err(anyhow!(
                "{} belongs to manifest {id}, current manifest is {}",
                artifact.display(),
                self.manifest_id
            )),
            None => {
                Err(anyhow!("{} carries no manifest id; refusing to mix", artifact.display()))
            }
        }
    }
}

/// SOURCE_DATE_EPOCH wins when set, for reproducible runs.
fn created_timestamp() -> String {
    let epoch = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or_else(|| chrono::Utc::now().timestamp());
    chrono::DateTime::from_timestamp(epoch, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

pub fn hash_file(path: &Path) -> Result<FilterListEntry> {
    let bytes =
        fs::read(path).with_context(|| format!("reading filter list {}", path.display()))?;
    Ok(FilterListEntry {
        path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join(MANIFEST_FILE)
}
