//! Tracking-score localization.
//!
//! Adapts spectra-based fault localization: tracking requests play the
//! failing tests, functional requests the passing ones, and code units
//! (scripts and methods) are scored by their participation in each.
//! The score is log10(n_tracking / n_functional); a unit participating
//! 100x more in tracking than functional scores above 2.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{LabeledTrace, RequestLabel};
use crate::trace::{units_of, Attribution, CodeUnitId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("tracking score is undefined when both counts are zero")]
    Undefined,
}

/// Participation counters of one code unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipationCounts {
    pub tracking_count: u64,
    pub functional_count: u64,
}

impl ParticipationCounts {
    pub fn new(tracking_count: u64, functional_count: u64) -> Self {
        ParticipationCounts { tracking_count, functional_count }
    }

    pub fn observed(&self) -> bool {
        self.tracking_count > 0 || self.functional_count > 0
    }
}

/// log10 ratio of tracking to functional participation. Stored as f64;
/// `+inf`/`-inf` are the sentinels for zero denominators/numerators.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TrackingScore(pub f64);

impl TrackingScore {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for TrackingScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{:.6}", self.0)
        }
    }
}

/// Tracking score of a unit with the given participation counts.
pub fn tracking_score(n_tracking: u64, n_functional: u64) -> Result<TrackingScore, ScoreError> {
    match (n_tracking, n_functional) {
        (0, 0) => Err(ScoreError::Undefined),
        (_, 0) => Ok(TrackingScore(f64::INFINITY)),
        (0, _) => Ok(TrackingScore(f64::NEG_INFINITY)),
        (t, f) => Ok(TrackingScore((t as f64 / f as f64).log10())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitClass {
    Tracking,
    Functional,
    Mixed,
}

impl UnitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitClass::Tracking => "tracking",
            UnitClass::Functional => "functional",
            UnitClass::Mixed => "mixed",
        }
    }
}

impl fmt::Display for UnitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification thresholds. The default (-2, 2) encodes the 100x rule.
///
/// The degenerate pair (0, 0) selects the no-threshold sensitivity mode:
/// any unit with both counts positive is Mixed, pure units keep their
/// sentinel class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
}

impl Thresholds {
    pub const DEFAULT: Thresholds = Thresholds { lower: -2.0, upper: 2.0 };

    pub fn new(lower: f64, upper: f64) -> Option<Thresholds> {
        let t = Thresholds { lower, upper };
        (lower < upper || t.is_degenerate()).then_some(t)
    }

    pub fn is_degenerate(self) -> bool {
        self.lower == 0.0 && self.upper == 0.0
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::DEFAULT
    }
}

/// Classify a defined score. Strict inequalities: a score of exactly
/// `upper` stays Mixed.
pub fn classify(score: TrackingScore, thresholds: Thresholds) -> UnitClass {
    if thresholds.is_degenerate() {
        return if score.0 == f64::INFINITY {
            UnitClass::Tracking
        } else if score.0 == f64::NEG_INFINITY {
            UnitClass::Functional
        } else {
            UnitClass::Mixed
        };
    }
    if score.0 > thresholds.upper {
        UnitClass::Tracking
    } else if score.0 < thresholds.lower {
        UnitClass::Functional
    } else {
        UnitClass::Mixed
    }
}

pub type ParticipationMap = BTreeMap<CodeUnitId, ParticipationCounts>;

/// Accumulate per-unit participation counts over labeled traces.
///
/// Each request bumps the counter matching its label once per distinct
/// unit in its stack (set semantics, so recursion does not double-count).
pub fn accumulate<'a>(
    traces: impl IntoIterator<Item = &'a LabeledTrace>,
    attribution: Attribution,
) -> ParticipationMap {
    let mut counts = ParticipationMap::new();
    for labeled in traces {
        accumulate_into(&mut counts, labeled, attribution);
    }
    counts
}

/// Per-trace accumulation step; merging partial maps is associative.
pub fn accumulate_into(
    counts: &mut ParticipationMap,
    labeled: &LabeledTrace,
    attribution: Attribution,
) {
    for req in &labeled.trace.requests {
        let label = labeled.label_of(&req.request_id);
        for unit in units_of(req, attribution) {
            let entry = counts.entry(unit).or_default();
            match label {
                RequestLabel::Tracking => entry.tracking_count += 1,
                RequestLabel::Functional => entry.functional_count += 1,
            }
        }
    }
}

/// Merge two partial count maps (associative, commutative).
pub fn merge_counts(into: &mut ParticipationMap, from: ParticipationMap) {
    for (unit, c) in from {
        let entry = into.entry(unit).or_default();
        entry.tracking_count += c.tracking_count;
        entry.functional_count += c.functional_count;
    }
}

/// Score, class and counts for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub counts: ParticipationCounts,
    pub score: TrackingScore,
    pub class: UnitClass,
}

/// Full corpus classification: every observed unit with its record.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub units: BTreeMap<CodeUnitId, UnitRecord>,
    pub attribution: Attribution,
    pub thresholds: Thresholds,
}

impl Classification {
    pub fn class_of(&self, unit: &CodeUnitId) -> Option<UnitClass> {
        self.units.get(unit).map(|r| r.class)
    }

    pub fn script_units(&self) -> impl Iterator<Item = (&CodeUnitId, &UnitRecord)> {
        self.units.iter().filter(|(u, _)| matches!(u, CodeUnitId::Script { .. }))
    }

    pub fn method_units(&self) -> impl Iterator<Item = (&CodeUnitId, &UnitRecord)> {
        self.units.iter().filter(|(u, _)| matches!(u, CodeUnitId::Method { .. }))
    }
}

/// Score and classify every unit in a count map.
///
/// Counts come from `accumulate`, so at least one counter is positive
/// and the score is always defined.
pub fn classify_all(
    counts: &ParticipationMap,
    attribution: Attribution,
    thresholds: Thresholds,
) -> Classification {
    let units = counts
        .iter()
        .filter(|(_, c)| c.observed())
        .map(|(unit, c)| {
            let score = tracking_score(c.tracking_count, c.functional_count)
                .expect("observed unit has a defined score");
            let class = classify(score, thresholds);
            (unit.clone(), UnitRecord { counts: *c, score, class })
        })
        .collect();
    Classification { units, attribution, thresholds }
}

/// Class tallies for one threshold pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTally {
    pub thresholds: Thresholds,
    pub tracking_units: usize,
    pub functional_units: usize,
    pub mixed_units: usize,
    /// Share of classified units that are Mixed, in percent.
    pub mixed_pct: f64,
}

/// Per-trace share of units that classify Mixed under `thresholds`, in
/// percent; feeds the mixed-share-per-site decile histograms. Traces
/// with no observed units contribute 0.
pub fn mixed_share_per_trace<'a>(
    traces: impl IntoIterator<Item = &'a LabeledTrace>,
    attribution: Attribution,
    thresholds: Thresholds,
) -> Vec<f64> {
    traces
        .into_iter()
        .map(|labeled| {
            let counts = accumulate([labeled], attribution);
            let tally = sensitivity(&counts, &[thresholds]);
            tally[0].mixed_pct
        })
        .collect()
}

/// Re-classify the same counts under each threshold pair.
pub fn sensitivity(counts: &ParticipationMap, threshold_list: &[Thresholds]) -> Vec<ThresholdTally> {
    threshold_list
        .iter()
        .map(|&thresholds| {
            let mut tally = ThresholdTally {
                thresholds,
                tracking_units: 0,
                functional_units: 0,
                mixed_units: 0,
                mixed_pct: 0.0,
            };
            for counts in counts.values().filter(|c| c.observed()) {
                let score = tracking_score(counts.tracking_count, counts.functional_count)
                    .expect("observed unit has a defined score");
                match classify(score, thresholds) {
                    UnitClass::Tracking => tally.tracking_units += 1,
                    UnitClass::Functional => tally.functional_units += 1,
                    UnitClass::Mixed => tally.mixed_units += 1,
                }
            }
            let total = tally.tracking_units + tally.functional_units + tally.mixed_units;
            if total > 0 {
                tally.mixed_pct = 100.0 * tally.mixed_units as f64 / total as f64;
            }
            tally
        })
        .collect()
}
