//! `localize`: accumulate participation counts, classify code units.

use log::info;

use jsblock_core::export::{classification_to_json, write_classification_csv, write_meta};
use jsblock_core::localize::{accumulate_into, classify_all, ParticipationMap};

use crate::corpus::{atomic_write, load_labeled_corpus};
use crate::manifest::RunManifest;
use crate::{CmdError, CmdResult, GlobalOpts};

pub fn run(globals: &GlobalOpts) -> CmdResult {
    let out_dir = globals.out_dir()?.clone();
    let thresholds = globals.thresholds()?;
    let attribution = jsblock_core::trace::Attribution::from(globals.attribution);

    let manifest = RunManifest::load(&out_dir)?;
    let corpus = load_labeled_corpus(&out_dir)?;
    let mut counts = ParticipationMap::new();
    for (site, labeled, id) in &corpus {
        manifest
            .check_artifact(&out_dir.join("labeled").join(format!("{site}.json")), id.as_deref())?;
        accumulate_into(&mut counts, labeled, attribution);
    }
    let cls = classify_all(&counts, attribution, thresholds);
    info!(
        "classified {} units ({} scripts, {} methods) from {} traces",
        cls.units.len(),
        cls.script_units().count(),
        cls.method_units().count(),
        corpus.len()
    );

    let json = classification_to_json(&cls, Some(&manifest.manifest_id));
    atomic_write(&out_dir.join("classification.json"), json.as_bytes())?;

    let mut csv_buf = Vec::new();
    write_meta(
        &mut csv_buf,
        &[
            ("manifest_id", manifest.manifest_id.as_str()),
            ("attribution", attribution.as_str()),
            ("thresholds", &format!("{} {}", thresholds.lower, thresholds.upper)),
        ],
    )
    .map_err(|e| CmdError::Data(e.into()))?;
    write_classification_csv(&mut csv_buf, &cls).map_err(|e| CmdError::Data(e.into()))?;
    atomic_write(&out_dir.join("classification.csv"), &csv_buf)?;
    Ok(())
}
