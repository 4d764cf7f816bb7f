//! On-disk formats: label CSVs, classification CSV/JSON, plan JSON,
//! simulation JSON, report CSVs, annotation import/export.
//!
//! Every writer is deterministic (sorted keys, pinned float formats),
//! and report writers carry optional `# key=value` header lines so
//! reports can reference the run manifest.

use std::collections::BTreeMap;
use std::io::Write;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::label::{LabeledTrace, RequestLabel};
use crate::localize::{Classification, Thresholds, TrackingScore, UnitClass, UnitRecord};
use crate::metrics::{
    AnnotationTable, BreakageAnnotation, CorpusSummary, DecileHistogram, SiteDiff, TopUnitRow,
    DECILE_LABELS,
};
use crate::sim::{BlockingConfig, BlockingPlan, SimulatedTrace};
use crate::trace::{canonical_value, parse_trace, Attribution, CodeUnitId, TagKind};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
}

fn format_err(msg: impl Into<String>) -> ExportError {
    ExportError::Format(msg.into())
}

/// Write `# key=value` comment lines ahead of a CSV body.
pub fn write_meta(w: &mut impl Write, meta: &[(&str, &str)]) -> Result<(), ExportError> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// labels
// ---------------------------------------------------------------------------

/// request_id, url, label, deciding_rule — one row per request, trace order.
pub fn write_labels_csv(w: impl Write, labeled: &LabeledTrace) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["request_id", "url", "label", "deciding_rule"])?;
    for req in &labeled.trace.requests {
        let rule = labeled.deciding_rule.get(&req.request_id).map(String::as_str).unwrap_or("");
        out.write_record([
            req.request_id.as_str(),
            req.url.as_str(),
            labeled.label_of(&req.request_id).as_str(),
            rule,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Canonical on-disk form of a labeled trace.
pub fn labeled_trace_to_json(labeled: &LabeledTrace, manifest_id: Option<&str>) -> String {
    let mut root = Map::new();
    if let Some(id) = manifest_id {
        root.insert("manifest_id".into(), Value::String(id.to_string()));
    }
    root.insert("trace".into(), canonical_value(&labeled.trace));
    let labels: Map<String, Value> = labeled
        .labels
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.as_str().to_string())))
        .collect();
    root.insert("labels".into(), Value::Object(labels));
    let rules: Map<String, Value> = labeled
        .deciding_rule
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    root.insert("deciding_rule".into(), Value::Object(rules));
    Value::Object(root).to_string()
}

/// Parse a labeled trace file; returns the manifest id it was written under.
pub fn labeled_trace_from_json(text: &str) -> Result<(LabeledTrace, Option<String>), ExportError> {
    let root: Value = serde_json::from_str(text)?;
    let manifest_id = root
        .get("manifest_id")
        .and_then(Value::as_str)
        .map(str::to_string);
    let trace_value =
        root.get("trace").ok_or_else(|| format_err("labeled trace missing `trace`"))?;
    let trace = parse_trace(&trace_value.to_string())?;
    let labels_value =
        root.get("labels").and_then(Value::as_object).ok_or_else(|| format_err("missing `labels`"))?;
    let mut labels = BTreeMap::new();
    for (k, v) in labels_value {
        let label = match v.as_str() {
            Some("tracking") => RequestLabel::Tracking,
            Some("functional") => RequestLabel::Functional,
            other => return Err(format_err(format!("bad label {other:?} for {k}"))),
        };
        labels.insert(k.clone(), label);
    }
    let mut deciding_rule = BTreeMap::new();
    if let Some(rules) = root.get("deciding_rule").and_then(Value::as_object) {
        for (k, v) in rules {
            let rule =
                v.as_str().ok_or_else(|| format_err(format!("bad deciding_rule for {k}")))?;
            deciding_rule.insert(k.clone(), rule.to_string());
        }
    }
    for req in &trace.requests {
        if !labels.contains_key(&req.request_id) {
            return Err(format_err(format!("label missing for request {:?}", req.request_id)));
        }
    }
    Ok((LabeledTrace { trace, labels, deciding_rule }, manifest_id))
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

fn score_value(score: TrackingScore) -> Value {
    if score.0 == f64::INFINITY {
        Value::String("+inf".into())
    } else if score.0 == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        Value::from(score.0)
    }
}

fn score_from_value(v: &Value) -> Result<TrackingScore, ExportError> {
    match v {
        Value::String(s) if s == "+inf" => Ok(TrackingScore(f64::INFINITY)),
        Value::String(s) if s == "-inf" => Ok(TrackingScore(f64::NEG_INFINITY)),
        Value::Number(n) => Ok(TrackingScore(
            n.as_f64().ok_or_else(|| format_err("non-f64 score"))?,
        )),
        other => Err(format_err(format!("bad score value {other}"))),
    }
}

/// JSON form consumed by plan construction and the report stage.
pub fn classification_to_json(cls: &Classification, manifest_id: Option<&str>) -> String {
    let units: Vec<Value> = cls
        .units
        .iter()
        .map(|(unit, rec)| {
            let mut obj = Map::new();
            obj.insert("kind".into(), Value::String(unit.kind_str().into()));
            obj.insert("script_url".into(), Value::String(unit.script_url().into()));
            obj.insert(
                "method_name".into(),
                unit.method_name().map(|m| Value::String(m.into())).unwrap_or(Value::Null),
            );
            obj.insert("n_tracking".into(), Value::from(rec.counts.tracking_count));
            obj.insert("n_functional".into(), Value::from(rec.counts.functional_count));
            obj.insert("score".into(), score_value(rec.score));
            obj.insert("class".into(), Value::String(rec.class.as_str().into()));
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    if let Some(id) = manifest_id {
        root.insert("manifest_id".into(), Value::String(id.to_string()));
    }
    root.insert("attribution".into(), Value::String(cls.attribution.as_str().into()));
    root.insert(
        "thresholds".into(),
        Value::Array(vec![Value::from(cls.thresholds.lower), Value::from(cls.thresholds.upper)]),
    );
    root.insert("units".into(), Value::Array(units));
    Value::Object(root).to_string()
}

pub fn classification_from_json(
    text: &str,
) -> Result<(Classification, Option<String>), ExportError> {
    let root: Value = serde_json::from_str(text)?;
    let manifest_id = root.get("manifest_id").and_then(Value::as_str).map(str::to_string);
    let attribution = match root.get("attribution").and_then(Value::as_str) {
        Some("full_stack") => Attribution::FullStack,
        Some("top_frame") => Attribution::TopFrame,
        other => return Err(format_err(format!("bad attribution {other:?}"))),
    };
    let thresholds = match root.get("thresholds").and_then(Value::as_array) {
        Some(pair) if pair.len() == 2 => {
            let lower = pair[0].as_f64().ok_or_else(|| format_err("bad threshold"))?;
            let upper = pair[1].as_f64().ok_or_else(|| format_err("bad threshold"))?;
            Thresholds::new(lower, upper)
                .ok_or_else(|| format_err("thresholds must satisfy lower < upper or be (0,0)"))?
        }
        _ => return Err(format_err("missing thresholds")),
    };
    let mut units = BTreeMap::new();
    let unit_values = root
        .get("units")
        .and_then(Value::as_array)
        .ok_or_else(|| format_err("missing units"))?;
    for uv in unit_values {
        let script_url = uv
            .get("script_url")
            .and_then(Value::as_str)
            .ok_or_else(|| format_err("unit missing script_url"))?;
        let unit = match uv.get("kind").and_then(Value::as_str) {
            Some("script") => CodeUnitId::script(script_url),
            Some("method") => {
                let method = uv
                    .get("method_name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| format_err("method unit missing method_name"))?;
                CodeUnitId::method(script_url, method)
            }
            other => return Err(format_err(format!("bad unit kind {other:?}"))),
        };
        let n_tracking = uv
            .get("n_tracking")
            .and_then(Value::as_u64)
            .ok_or_else(|| format_err("unit missing n_tracking"))?;
        let n_functional = uv
            .get("n_functional")
            .and_then(Value::as_u64)
            .ok_or_else(|| format_err("unit missing n_functional"))?;
        let score =
            score_from_value(uv.get("score").ok_or_else(|| format_err("unit missing score"))?)?;
        let class = match uv.get("class").and_then(Value::as_str) {
            Some("tracking") => UnitClass::Tracking,
            Some("functional") => UnitClass::Functional,
            Some("mixed") => UnitClass::Mixed,
            other => return Err(format_err(format!("bad unit class {other:?}"))),
        };
        units.insert(
            unit,
            UnitRecord {
                counts: crate::localize::ParticipationCounts::new(n_tracking, n_functional),
                score,
                class,
            },
        );
    }
    Ok((Classification { units, attribution, thresholds }, manifest_id))
}

/// unit_kind, script_url, method_name, n_tracking, n_functional, score, class.
pub fn write_classification_csv(w: impl Write, cls: &Classification) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "unit_kind",
        "script_url",
        "method_name",
        "n_tracking",
        "n_functional",
        "score",
        "class",
    ])?;
    for (unit, rec) in &cls.units {
        out.write_record([
            unit.kind_str(),
            unit.script_url(),
            unit.method_name().unwrap_or(""),
            &rec.counts.tracking_count.to_string(),
            &rec.counts.functional_count.to_string(),
            &rec.score.to_string(),
            rec.class.as_str(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// plans and simulation output
// ---------------------------------------------------------------------------

/// `{config, blocked_scripts: [...], blocked_methods: [[script, method], ...]}`
pub fn plan_to_json(plan: &BlockingPlan) -> Result<String, ExportError> {
    Ok(serde_json::to_value(plan)?.to_string())
}

pub fn plan_from_json(text: &str) -> Result<BlockingPlan, ExportError> {
    Ok(serde_json::from_str(text)?)
}

/// Simulation output: removed request ids with causes, survivors, tags.
pub fn simulation_to_json(
    site: &str,
    labeled: &LabeledTrace,
    sim: &SimulatedTrace,
    manifest_id: Option<&str>,
) -> String {
    let removed: Vec<Value> = sim
        .removed_requests
        .iter()
        .map(|(id, cause)| {
            let mut obj = Map::new();
            obj.insert("request_id".into(), Value::String(id.clone()));
            obj.insert("cause".into(), Value::String(cause.as_str().into()));
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    if let Some(id) = manifest_id {
        root.insert("manifest_id".into(), Value::String(id.to_string()));
    }
    root.insert("site".into(), Value::String(site.to_string()));
    root.insert("config".into(), Value::String(sim.config.as_str().into()));
    root.insert("page_url".into(), Value::String(labeled.trace.page_url.clone()));
    root.insert("removed".into(), Value::Array(removed));
    root.insert(
        "surviving_requests".into(),
        Value::Array(sim.surviving_requests.iter().map(|s| Value::String(s.clone())).collect()),
    );
    root.insert(
        "surviving_tags".into(),
        Value::Array(sim.surviving_tags.iter().map(|&i| Value::from(i as u64)).collect()),
    );
    Value::Object(root).to_string()
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

fn fmt_pct(v: f64) -> String {
    format!("{v:.2}")
}

/// Per-site diff table: one row per (site, config).
pub fn write_site_diffs_csv(
    mut w: impl Write,
    rows: &[(String, BlockingConfig, SiteDiff)],
    meta: &[(&str, &str)],
) -> Result<(), ExportError> {
    write_meta(&mut w, meta)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![
        "site".to_string(),
        "config".to_string(),
        "control_tracking".to_string(),
        "control_functional".to_string(),
        "missing_tracking".to_string(),
        "missing_functional".to_string(),
        "pct_reduction_tracking".to_string(),
        "pct_reduction_functional".to_string(),
    ];
    header.extend(TagKind::ALL.iter().map(|k| format!("missing_tags_{k}")));
    out.write_record(&header)?;
    for (site, config, diff) in rows {
        let mut record = vec![
            site.clone(),
            config.as_str().to_string(),
            diff.requests.control_tracking.to_string(),
            diff.requests.control_functional.to_string(),
            diff.requests.missing_tracking.to_string(),
            diff.requests.missing_functional.to_string(),
            fmt_pct(diff.requests.pct_reduction_tracking),
            fmt_pct(diff.requests.pct_reduction_functional),
        ];
        record.extend(TagKind::ALL.iter().map(|&k| diff.tags.count(k).to_string()));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Corpus summary: one row per configuration.
pub fn write_corpus_summary_csv(
    mut w: impl Write,
    summaries: &[CorpusSummary],
    meta: &[(&str, &str)],
) -> Result<(), ExportError> {
    write_meta(&mut w, meta)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![
        "config".to_string(),
        "sites".to_string(),
        "control_tracking_total".to_string(),
        "control_functional_total".to_string(),
        "missing_tracking_total".to_string(),
        "missing_functional_total".to_string(),
        "mean_pct_reduction_tracking".to_string(),
        "mean_pct_reduction_functional".to_string(),
    ];
    header.extend(TagKind::ALL.iter().map(|k| format!("missing_tags_{k}")));
    out.write_record(&header)?;
    for s in summaries {
        let mut record = vec![
            s.config.as_str().to_string(),
            s.sites.to_string(),
            s.control_tracking_total.to_string(),
            s.control_functional_total.to_string(),
            s.missing_tracking_total.to_string(),
            s.missing_functional_total.to_string(),
            format!("{:.4}", s.mean_pct_reduction_tracking),
            format!("{:.4}", s.mean_pct_reduction_functional),
        ];
        record.extend(TagKind::ALL.iter().map(|&k| s.tag_totals.count(k).to_string()));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Decile histogram: bin_label, tracking_count, functional_count.
pub fn write_deciles_csv(
    mut w: impl Write,
    tracking: &DecileHistogram,
    functional: &DecileHistogram,
    meta: &[(&str, &str)],
) -> Result<(), ExportError> {
    write_meta(&mut w, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_label", "tracking_count", "functional_count"])?;
    for (i, label) in DECILE_LABELS.iter().enumerate() {
        out.write_record([
            *label,
            &tracking.bins[i].to_string(),
            &functional.bins[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Top units: script_domain, script_url, method_name, sites, site_pct.
pub fn write_top_units_csv(
    mut w: impl Write,
    rows: &[TopUnitRow],
    meta: &[(&str, &str)],
) -> Result<(), ExportError> {
    write_meta(&mut w, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["script_domain", "script_url", "method_name", "sites", "site_pct"])?;
    for row in rows {
        out.write_record([
            row.script_domain.as_str(),
            row.script_url.as_str(),
            row.method_name.as_str(),
            &row.sites_present.to_string(),
            &fmt_pct(row.site_pct),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// annotations
// ---------------------------------------------------------------------------

/// site, config, category, severity, note.
pub fn read_annotations_csv(text: &str) -> Result<Vec<BreakageAnnotation>, ExportError> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 4 {
            return Err(format_err(format!("annotation row too short: {row:?}")));
        }
        let config: BlockingConfig =
            row[1].parse().map_err(|e: String| format_err(e))?;
        let category = row[2].parse().map_err(|e: String| format_err(e))?;
        let severity = row[3].parse().map_err(|e: String| format_err(e))?;
        records.push(BreakageAnnotation {
            site: row[0].to_string(),
            config,
            category,
            severity,
            note: row.get(4).unwrap_or("").to_string(),
        });
    }
    Ok(records)
}

pub fn write_annotations_csv(
    w: impl Write,
    records: &[BreakageAnnotation],
) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["site", "config", "category", "severity", "note"])?;
    for r in records {
        out.write_record([
            r.site.as_str(),
            r.config.as_str(),
            r.category.as_str(),
            r.severity.as_str(),
            r.note.as_str(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// config, category, severity, count.
pub fn write_annotation_summary_csv(
    mut w: impl Write,
    table: &AnnotationTable,
    meta: &[(&str, &str)],
) -> Result<(), ExportError> {
    write_meta(&mut w, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["config", "category", "severity", "count"])?;
    for ((config, category, severity), count) in table {
        out.write_record([
            config.as_str(),
            category.as_str(),
            severity.as_str(),
            &count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::localize::{accumulate, classify_all};
    use crate::sim::{build_plan, simulate};

    fn tag_manager_cls() -> Classification {
        let corpus = fixtures::tag_manager_labeled_corpus();
        let counts = accumulate(&corpus, Attribution::FullStack);
        classify_all(&counts, Attribution::FullStack, Thresholds::DEFAULT)
    }

    #[test]
    fn labeled_trace_roundtrip() {
        let labeled = &fixtures::tag_manager_labeled_corpus()[0];
        let json = labeled_trace_to_json(labeled, Some("abc123"));
        let (back, id) = labeled_trace_from_json(&json).unwrap();
        assert_eq!(&back, labeled);
        assert_eq!(id.as_deref(), Some("abc123"));
    }

    #[test]
    fn classification_roundtrip_with_sentinels() {
        let mut cls = tag_manager_cls();
        // force a sentinel into the set
        cls.units.insert(
            CodeUnitId::method("https://x.example/p.js", "pure"),
            UnitRecord {
                counts: crate::localize::ParticipationCounts::new(5, 0),
                score: TrackingScore(f64::INFINITY),
                class: UnitClass::Tracking,
            },
        );
        let json = classification_to_json(&cls, Some("m1"));
        let (back, id) = classification_from_json(&json).unwrap();
        assert_eq!(id.as_deref(), Some("m1"));
        assert_eq!(back.units.len(), cls.units.len());
        assert_eq!(
            back.units[&CodeUnitId::method("https://x.example/p.js", "pure")].score.0,
            f64::INFINITY
        );
        assert_eq!(back.thresholds, cls.thresholds);
    }

    #[test]
    fn classification_csv_has_fixture_rows() {
        let mut buf = Vec::new();
        write_classification_csv(&mut buf, &tag_manager_cls()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("script,https://tags.site.example/utag.js,,132,160,-0.083546,mixed"));
        assert!(text.contains("method,https://tags.site.example/utag.js,loader,131,1,2.117271,tracking"));
        assert!(text.contains("method,https://tags.site.example/utag.js,fireCORS,1,159,-2.201397,functional"));
    }

    #[test]
    fn plan_json_shape() {
        let plan = build_plan(&tag_manager_cls(), crate::sim::BlockingConfig::Tm);
        let json = plan_to_json(&plan).unwrap();
        assert_eq!(
            json,
            r#"{"blocked_methods":[["https://tags.site.example/utag.js","loader"]],"blocked_scripts":[],"config":"TM"}"#
        );
        let back = plan_from_json(&json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn simulation_json_lists_causes() {
        let labeled = &fixtures::tag_manager_labeled_corpus()[0];
        let plan = build_plan(&tag_manager_cls(), crate::sim::BlockingConfig::Tms);
        let sim = simulate(labeled, &plan);
        let json = simulation_to_json("site0", labeled, &sim, Some("m1"));
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["config"], "TMS");
        assert!(!v["removed"].as_array().unwrap().is_empty());
    }

    #[test]
    fn deciles_csv_labels() {
        let mut buf = Vec::new();
        let hist = DecileHistogram::default();
        write_deciles_csv(&mut buf, &hist, &hist, &[("manifest_id", "m1")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# manifest_id=m1\n"));
        for label in DECILE_LABELS {
            assert!(text.contains(&format!("{label},0,0")));
        }
    }

    #[test]
    fn annotations_roundtrip() {
        let records = vec![BreakageAnnotation {
            site: "a.com".into(),
            config: BlockingConfig::Tms,
            category: crate::metrics::BreakageCategory::Navigation,
            severity: crate::metrics::Severity::Major,
            note: "menu gone, needs follow-up".into(),
        }];
        let mut buf = Vec::new();
        write_annotations_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_annotations_csv(&text).unwrap();
        assert_eq!(back, records);
    }
}
