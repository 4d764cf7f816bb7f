//! Breakage metrics: control-vs-simulated request diffs, missing-tag
//! counts, decile histograms, corpus aggregation, top-unit presence
//! tables, and storage for the manual-inspection annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{LabeledTrace, RequestLabel};
use crate::localize::Classification;
use crate::psl::PublicSuffixList;
use crate::sim::{BlockingConfig, SimulatedTrace};
use crate::trace::{CodeUnitId, PageTrace, TagKind};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percentage {value} outside [0, 100]")]
    RangeError { value: f64 },
    #[error("duplicate annotation for ({site}, {config}, {category})")]
    DuplicateAnnotation { site: String, config: BlockingConfig, category: BreakageCategory },
}

/// Missing-request counts of one simulated trace against its control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestDiff {
    pub missing_tracking: u64,
    pub missing_functional: u64,
    pub control_tracking: u64,
    pub control_functional: u64,
    pub pct_reduction_tracking: f64,
    pub pct_reduction_functional: f64,
}

/// 100·missing/control, defined as 0 when control is 0 so tracker-free
/// sites never inflate reduction averages.
fn pct(missing: u64, control: u64) -> f64 {
    if control == 0 {
        0.0
    } else {
        100.0 * missing as f64 / control as f64
    }
}

/// Diff the simulated request set against the control labels.
pub fn diff_requests(control: &LabeledTrace, sim: &SimulatedTrace) -> RequestDiff {
    let mut diff = RequestDiff::default();
    for req in &control.trace.requests {
        let removed = sim.removed_requests.contains_key(&req.request_id);
        match control.label_of(&req.request_id) {
            RequestLabel::Tracking => {
                diff.control_tracking += 1;
                if removed {
                    diff.missing_tracking += 1;
                }
            }
            RequestLabel::Functional => {
                diff.control_functional += 1;
                if removed {
                    diff.missing_functional += 1;
                }
            }
        }
    }
    diff.pct_reduction_tracking = pct(diff.missing_tracking, diff.control_tracking);
    diff.pct_reduction_functional = pct(diff.missing_functional, diff.control_functional);
    diff
}

/// Missing tags whose src belonged to a Functional request in control,
/// per tag kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagDiff {
    pub missing_functional: BTreeMap<TagKind, u64>,
}

impl TagDiff {
    pub fn count(&self, kind: TagKind) -> u64 {
        self.missing_functional.get(&kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.missing_functional.values().sum()
    }

    pub fn add(&mut self, other: &TagDiff) {
        for kind in TagKind::ALL {
            *self.missing_functional.entry(kind).or_insert(0) += other.count(kind);
        }
    }
}

/// A tag counts as missing-functional iff its src equals the URL of a
/// removed request that control labeled Functional.
pub fn diff_tags(
    control: &PageTrace,
    labels: &BTreeMap<String, RequestLabel>,
    sim: &SimulatedTrace,
) -> TagDiff {
    let removed_functional_urls: BTreeSet<&str> = control
        .requests
        .iter()
        .filter(|r| {
            sim.removed_requests.contains_key(&r.request_id)
                && labels.get(&r.request_id) == Some(&RequestLabel::Functional)
        })
        .map(|r| r.url.as_str())
        .collect();
    let mut diff = TagDiff::default();
    for kind in TagKind::ALL {
        diff.missing_functional.insert(kind, 0);
    }
    for tag in &control.tags {
        if removed_functional_urls.contains(tag.src_url.as_str()) {
            *diff.missing_functional.entry(tag.tag_kind).or_insert(0) += 1;
        }
    }
    diff
}

/// The ten 10%-wide bins sites are distributed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecileHistogram {
    pub bins: [u64; 10],
}

pub const DECILE_LABELS: [&str; 10] = [
    "0-10", "11-20", "21-30", "31-40", "41-50", "51-60", "61-70", "71-80", "81-90", "91-100",
];

impl DecileHistogram {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn add(&mut self, other: &DecileHistogram) {
        for (a, b) in self.bins.iter_mut().zip(other.bins.iter()) {
            *a += b;
        }
    }
}

/// Bin index of a percentage: 0 lands in the first bin, otherwise the
/// half-open ranges (0,10], (10,20], …, (90,100].
pub fn decile_bin(value: f64) -> Result<usize, MetricsError> {
    if !(0.0..=100.0).contains(&value) || value.is_nan() {
        return Err(MetricsError::RangeError { value });
    }
    if value == 0.0 {
        return Ok(0);
    }
    Ok(((value / 10.0).ceil() as usize).saturating_sub(1).min(9))
}

/// Histogram of per-site percentages.
pub fn bin_deciles(per_site_percentages: &[f64]) -> Result<DecileHistogram, MetricsError> {
    let mut hist = DecileHistogram::default();
    for &v in per_site_percentages {
        hist.bins[decile_bin(v)?] += 1;
    }
    Ok(hist)
}

/// One site's diff pair under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDiff {
    pub site: String,
    pub requests: RequestDiff,
    pub tags: TagDiff,
}

/// Corpus-level aggregate for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub config: BlockingConfig,
    pub sites: usize,
    pub control_tracking_total: u64,
    pub control_functional_total: u64,
    pub missing_tracking_total: u64,
    pub missing_functional_total: u64,
    /// Unweighted mean of per-site percentage reductions ("per website",
    /// not a pooled ratio).
    pub mean_pct_reduction_tracking: f64,
    pub mean_pct_reduction_functional: f64,
    pub deciles_tracking: DecileHistogram,
    pub deciles_functional: DecileHistogram,
    pub tag_totals: TagDiff,
}

/// Fold per-site diffs into the corpus summary.
pub fn corpus_report(diffs: &[SiteDiff], config: BlockingConfig) -> Result<CorpusSummary, MetricsError> {
    let mut summary = CorpusSummary {
        config,
        sites: diffs.len(),
        control_tracking_total: 0,
        control_functional_total: 0,
        missing_tracking_total: 0,
        missing_functional_total: 0,
        mean_pct_reduction_tracking: 0.0,
        mean_pct_reduction_functional: 0.0,
        deciles_tracking: DecileHistogram::default(),
        deciles_functional: DecileHistogram::default(),
        tag_totals: TagDiff::default(),
    };
    let mut pct_tracking = Vec::with_capacity(diffs.len());
    let mut pct_functional = Vec::with_capacity(diffs.len());
    for d in diffs {
        summary.control_tracking_total += d.requests.control_tracking;
        summary.control_functional_total += d.requests.control_functional;
        summary.missing_tracking_total += d.requests.missing_tracking;
        summary.missing_functional_total += d.requests.missing_functional;
        summary.tag_totals.add(&d.tags);
        pct_tracking.push(d.requests.pct_reduction_tracking);
        pct_functional.push(d.requests.pct_reduction_functional);
    }
    if !diffs.is_empty() {
        summary.mean_pct_reduction_tracking =
            pct_tracking.iter().sum::<f64>() / diffs.len() as f64;
        summary.mean_pct_reduction_functional =
            pct_functional.iter().sum::<f64>() / diffs.len() as f64;
    }
    summary.deciles_tracking = bin_deciles(&pct_tracking)?;
    summary.deciles_functional = bin_deciles(&pct_functional)?;
    Ok(summary)
}

/// The four inspection categories of the manual-analysis rubric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakageCategory {
    Navigation,
    Sso,
    Appearance,
    Additional,
}

impl BreakageCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            BreakageCategory::Navigation => "navigation",
            BreakageCategory::Sso => "sso",
            BreakageCategory::Appearance => "appearance",
            BreakageCategory::Additional => "additional",
        }
    }
}

impl fmt::Display for BreakageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BreakageCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "navigation" => Ok(BreakageCategory::Navigation),
            "sso" => Ok(BreakageCategory::Sso),
            "appearance" => Ok(BreakageCategory::Appearance),
            "additional" => Ok(BreakageCategory::Additional),
            other => Err(format!("unknown breakage category {other:?}")),
        }
    }
}

/// Three-level breakage scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    None,
    Minor,
    Major,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::None => "none",
            Severity::Minor => "minor",
            Severity::Major => "major",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Severity::None),
            "minor" => Ok(Severity::Minor),
            "major" => Ok(Severity::Major),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

/// One manual-inspection record. At most one per (site, config, category).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakageAnnotation {
    pub site: String,
    pub config: BlockingConfig,
    pub category: BreakageCategory,
    pub severity: Severity,
    pub note: String,
}

pub type AnnotationTable = BTreeMap<(BlockingConfig, BreakageCategory, Severity), u64>;

/// Count annotations per (config, category, severity) cell.
pub fn aggregate_annotations(
    records: &[BreakageAnnotation],
) -> Result<AnnotationTable, MetricsError> {
    let mut seen = BTreeSet::new();
    let mut table = AnnotationTable::new();
    for r in records {
        if !seen.insert((r.site.clone(), r.config, r.category)) {
            return Err(MetricsError::DuplicateAnnotation {
                site: r.site.clone(),
                config: r.config,
                category: r.category,
            });
        }
        *table.entry((r.config, r.category, r.severity)).or_insert(0) += 1;
    }
    Ok(table)
}

/// One row of the top-units table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopUnitRow {
    pub script_domain: String,
    pub script_url: String,
    pub method_name: String,
    pub sites_present: usize,
    pub site_pct: f64,
}

/// Method units ranked by the share of sites they appear on.
///
/// `per_site_presence` maps a site id to the units observed there. Ties
/// break lexicographically by (domain, script, method).
pub fn top_units_report(
    cls: &Classification,
    per_site_presence: &BTreeMap<String, BTreeSet<CodeUnitId>>,
    psl: &PublicSuffixList,
) -> Vec<TopUnitRow> {
    let total_sites = per_site_presence.len();
    if total_sites == 0 {
        return Vec::new();
    }
    let mut rows: Vec<TopUnitRow> = cls
        .method_units()
        .map(|(unit, _)| {
            let sites_present = per_site_presence.values().filter(|units| units.contains(unit)).count();
            let script_url = unit.script_url().to_string();
            let script_domain = crate::psl::registrable_domain(&script_url, psl)
                .unwrap_or_else(|_| script_url.clone());
            TopUnitRow {
                script_domain,
                script_url,
                method_name: unit.method_name().unwrap_or_default().to_string(),
                sites_present,
                site_pct: 100.0 * sites_present as f64 / total_sites as f64,
            }
        })
        .filter(|row| row.sites_present > 0)
        .collect();
    rows.sort_by(|a, b| {
        b.sites_present
            .cmp(&a.sites_present)
            .then_with(|| a.script_domain.cmp(&b.script_domain))
            .then_with(|| a.script_url.cmp(&b.script_url))
            .then_with(|| a.method_name.cmp(&b.method_name))
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RemovalCause;
    use crate::trace::{NetworkRequest, ResourceKind, ResourceTag};

    fn control_with(n_tracking: usize, n_functional: usize) -> LabeledTrace {
        let mut requests = Vec::new();
        let mut labels = BTreeMap::new();
        for i in 0..n_tracking + n_functional {
            let id = format!("r{i}");
            requests.push(NetworkRequest {
                request_id: id.clone(),
                url: format!("https://x.com/{i}"),
                resource_kind: ResourceKind::Xhr,
                stack: vec![],
                fetched_script_url: None,
            });
            let label =
                if i < n_tracking { RequestLabel::Tracking } else { RequestLabel::Functional };
            labels.insert(id, label);
        }
        LabeledTrace {
            trace: PageTrace {
                page_url: "https://x.com/".into(),
                crawl_seconds: 20.0,
                requests,
                tags: vec![],
            },
            labels,
            deciding_rule: BTreeMap::new(),
        }
    }

    fn sim_removing(control: &LabeledTrace, ids: &[&str]) -> SimulatedTrace {
        let removed: BTreeMap<String, RemovalCause> =
            ids.iter().map(|id| (id.to_string(), RemovalCause::DirectBlock)).collect();
        SimulatedTrace {
            config: BlockingConfig::Ts,
            surviving_requests: control
                .trace
                .requests
                .iter()
                .filter(|r| !removed.contains_key(&r.request_id))
                .map(|r| r.request_id.clone())
                .collect(),
            removed_requests: removed,
            surviving_tags: (0..control.trace.tags.len()).collect(),
        }
    }

    #[test]
    fn identity_sim_diffs_to_zero() {
        let control = control_with(3, 4);
        let sim = sim_removing(&control, &[]);
        let diff = diff_requests(&control, &sim);
        assert_eq!(diff.missing_tracking, 0);
        assert_eq!(diff.missing_functional, 0);
        assert_eq!(diff.pct_reduction_tracking, 0.0);
        assert_eq!(diff.pct_reduction_functional, 0.0);
    }

    #[test]
    fn seventy_ten_split() {
        let control = control_with(10, 10);
        // remove 7 tracking (r0..r6) and 1 functional (r10)
        let sim = sim_removing(&control, &["r0", "r1", "r2", "r3", "r4", "r5", "r6", "r10"]);
        let diff = diff_requests(&control, &sim);
        assert_eq!(diff.pct_reduction_tracking, 70.0);
        assert_eq!(diff.pct_reduction_functional, 10.0);
    }

    #[test]
    fn zero_denominator_convention() {
        let control = control_with(0, 5);
        let sim = sim_removing(&control, &["r0"]);
        let diff = diff_requests(&control, &sim);
        assert_eq!(diff.control_tracking, 0);
        assert_eq!(diff.pct_reduction_tracking, 0.0);
    }

    #[test]
    fn tag_diff_counts_functional_only() {
        let mut control = control_with(1, 1);
        control.trace.tags = vec![
            ResourceTag { tag_kind: TagKind::Img, src_url: "https://x.com/0".into() },
            ResourceTag { tag_kind: TagKind::Img, src_url: "https://x.com/1".into() },
            ResourceTag { tag_kind: TagKind::Iframe, src_url: "https://never.requested/".into() },
        ];
        // r0 tracking, r1 functional; remove both
        let sim = sim_removing(&control, &["r0", "r1"]);
        let tags = diff_tags(&control.trace, &control.labels, &sim);
        // only the tag whose src matches the removed *functional* request counts
        assert_eq!(tags.count(TagKind::Img), 1);
        assert_eq!(tags.count(TagKind::Iframe), 0);
        assert_eq!(tags.total(), 1);
    }

    #[test]
    fn empty_plan_tag_diff_is_zero() {
        let control = control_with(1, 1);
        let sim = sim_removing(&control, &[]);
        let tags = diff_tags(&control.trace, &control.labels, &sim);
        assert_eq!(tags.total(), 0);
    }

    #[test]
    fn decile_edges() {
        let hist = bin_deciles(&[0.0, 5.0, 10.0, 10.1, 95.0]).unwrap();
        assert_eq!(hist.bins[0], 3);
        assert_eq!(hist.bins[1], 1);
        assert_eq!(hist.bins[9], 1);
        assert_eq!(hist.total(), 5);
    }

    #[test]
    fn decile_empty_and_range() {
        assert_eq!(bin_deciles(&[]).unwrap().total(), 0);
        assert!(matches!(bin_deciles(&[100.1]), Err(MetricsError::RangeError { .. })));
        assert!(matches!(bin_deciles(&[-0.1]), Err(MetricsError::RangeError { .. })));
    }

    #[test]
    fn corpus_mean_is_per_site() {
        let a = SiteDiff {
            site: "a".into(),
            requests: RequestDiff {
                missing_tracking: 10,
                control_tracking: 10,
                pct_reduction_tracking: 100.0,
                ..RequestDiff::default()
            },
            tags: TagDiff::default(),
        };
        let b = SiteDiff {
            site: "b".into(),
            requests: RequestDiff {
                missing_tracking: 0,
                control_tracking: 1000,
                pct_reduction_tracking: 0.0,
                ..RequestDiff::default()
            },
            tags: TagDiff::default(),
        };
        let summary = corpus_report(&[a, b], BlockingConfig::All).unwrap();
        // per-site mean, not pooled 10/1010
        assert_eq!(summary.mean_pct_reduction_tracking, 50.0);
        assert_eq!(summary.deciles_tracking.total(), 2);
    }

    #[test]
    fn single_site_summary_equals_diff() {
        let d = SiteDiff {
            site: "only".into(),
            requests: RequestDiff {
                missing_tracking: 3,
                missing_functional: 1,
                control_tracking: 4,
                control_functional: 10,
                pct_reduction_tracking: 75.0,
                pct_reduction_functional: 10.0,
            },
            tags: TagDiff::default(),
        };
        let s = corpus_report(std::slice::from_ref(&d), BlockingConfig::Ts).unwrap();
        assert_eq!(s.missing_tracking_total, 3);
        assert_eq!(s.mean_pct_reduction_tracking, 75.0);
        assert_eq!(s.mean_pct_reduction_functional, 10.0);
    }

    #[test]
    fn annotation_aggregation() {
        let rec = |site: &str| BreakageAnnotation {
            site: site.into(),
            config: BlockingConfig::Tms,
            category: BreakageCategory::Appearance,
            severity: Severity::Minor,
            note: String::new(),
        };
        let records = vec![rec("a"), rec("b"), rec("c")];
        let table = aggregate_annotations(&records).unwrap();
        assert_eq!(
            table[&(BlockingConfig::Tms, BreakageCategory::Appearance, Severity::Minor)],
            3
        );
        assert!(aggregate_annotations(&[]).unwrap().is_empty());
    }

    fn classification_with_methods(units: &[(&str, &str)]) -> Classification {
        let map = units
            .iter()
            .flat_map(|(script, method)| {
                let rec = crate::localize::UnitRecord {
                    counts: crate::localize::ParticipationCounts::new(1, 1),
                    score: crate::localize::TrackingScore(0.0),
                    class: crate::localize::UnitClass::Mixed,
                };
                [
                    (crate::trace::CodeUnitId::script(*script), rec),
                    (crate::trace::CodeUnitId::method(*script, *method), rec),
                ]
            })
            .collect();
        Classification {
            units: map,
            attribution: crate::trace::Attribution::FullStack,
            thresholds: crate::localize::Thresholds::DEFAULT,
        }
    }

    #[test]
    fn top_units_site_percentages() {
        let analytics = "https://www.google-analytics.com/analytics.js";
        let cls = classification_with_methods(&[(analytics, "wd")]);
        let unit = CodeUnitId::method(analytics, "wd");
        let mut presence: BTreeMap<String, BTreeSet<CodeUnitId>> = BTreeMap::new();
        for i in 0..100 {
            let mut units = BTreeSet::new();
            if i < 38 {
                units.insert(unit.clone());
            }
            presence.insert(format!("site{i:03}"), units);
        }
        let rows = top_units_report(&cls, &presence, PublicSuffixList::bundled());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].script_domain, "google-analytics.com");
        assert_eq!(rows[0].method_name, "wd");
        assert_eq!(rows[0].site_pct, 38.0);
    }

    #[test]
    fn top_units_single_site_is_all_hundred() {
        let cls = classification_with_methods(&[
            ("https://a.example/x.js", "f"),
            ("https://b.example/y.js", "g"),
        ]);
        let mut presence: BTreeMap<String, BTreeSet<CodeUnitId>> = BTreeMap::new();
        presence.insert(
            "only".into(),
            cls.method_units().map(|(u, _)| u.clone()).collect(),
        );
        let rows = top_units_report(&cls, &presence, PublicSuffixList::bundled());
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.site_pct == 100.0));
    }

    #[test]
    fn top_units_ties_break_lexicographically() {
        let cls = classification_with_methods(&[
            ("https://zeta.example/z.js", "m"),
            ("https://alpha.example/a.js", "m"),
            ("https://alpha.example/a.js", "b"),
        ]);
        let mut presence: BTreeMap<String, BTreeSet<CodeUnitId>> = BTreeMap::new();
        presence.insert("s1".into(), cls.method_units().map(|(u, _)| u.clone()).collect());
        let rows = top_units_report(&cls, &presence, PublicSuffixList::bundled());
        let order: Vec<(String, String)> =
            rows.iter().map(|r| (r.script_domain.clone(), r.method_name.clone())).collect();
        assert_eq!(
            order,
            vec![
                ("alpha.example".into(), "b".into()),
                ("alpha.example".into(), "m".into()),
                ("zeta.example".into(), "m".into()),
            ]
        );
    }

    #[test]
    fn duplicate_annotation_errors() {
        let rec = BreakageAnnotation {
            site: "a".into(),
            config: BlockingConfig::Tm,
            category: BreakageCategory::Sso,
            severity: Severity::Major,
            note: String::new(),
        };
        let err = aggregate_annotations(&[rec.clone(), rec]).unwrap_err();
        assert!(matches!(err, MetricsError::DuplicateAnnotation { .. }));
    }
}
