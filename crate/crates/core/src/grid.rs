//! Facility overhead and grid carbon intensity.
//!
//! Energy intervals and intensity intervals rarely share boundaries. Each
//! energy interval is cut at every intensity boundary it straddles and its
//! energy is spread uniformly over the pieces; each piece is then charged at
//! the intensity in force over it. Intensity is a step function over
//! half-open `[start, end)` intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, Execution};
use crate::model::EnergySeries;

pub const JOULES_PER_KWH: f64 = 3.6e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("PUE must be finite and >= 1, got {0}")]
    InvalidPue(f64),
    #[error("intensity entry {index}: {reason}")]
    InvalidIntensity { index: usize, reason: String },
    #[error("intensity entries {index} and {next}: overlap ({reason})")]
    Overlap {
        index: usize,
        next: usize,
        reason: String,
    },
    #[error(
        "energy interval starting at {interval_start} is not covered by the intensity feed over [{gap_start}, {gap_end}) ({joules} J)"
    )]
    Coverage {
        interval_start: i64,
        gap_start: f64,
        gap_end: f64,
        joules: f64,
    },
    #[error("energy interval starting at {start} has a sub-second duration {duration_s}")]
    OracleResolution { start: i64, duration_s: f64 },
}

/// Dimensionless facility overhead, always >= 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct PueFactor(f64);

impl PueFactor {
    pub const ONE: PueFactor = PueFactor(1.0);

    pub fn new(value: f64) -> Result<Self, GridError> {
        if value.is_finite() && value >= 1.0 {
            Ok(PueFactor(value))
        } else {
            Err(GridError::InvalidPue(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn apply_pue(joules: f64, pue: PueFactor) -> f64 {
    joules * pue.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityEntry {
    pub start: i64,
    pub end: i64,
    pub intensity_kg_per_kwh: f64,
}

/// Piecewise-constant carbon intensity (kgCO2e/kWh) for one region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensitySeries {
    region: String,
    entries: Vec<IntensityEntry>,
}

impl IntensitySeries {
    /// Entries must be sorted, non-overlapping, non-empty and non-negative.
    /// Gaps between entries are allowed.
    pub fn new(region: impl Into<String>, entries: Vec<IntensityEntry>) -> Result<Self, GridError> {
        for (index, e) in entries.iter().enumerate() {
            if e.end <= e.start {
                return Err(GridError::InvalidIntensity {
                    index,
                    reason: format!("end {} must be after start {}", e.end, e.start),
                });
            }
            if !(e.intensity_kg_per_kwh.is_finite() && e.intensity_kg_per_kwh >= 0.0) {
                return Err(GridError::InvalidIntensity {
                    index,
                    reason: format!(
                        "intensity {} must be finite and >= 0",
                        e.intensity_kg_per_kwh
                    ),
                });
            }
        }
        for (index, pair) in entries.windows(2).enumerate() {
            if pair[1].start < pair[0].end {
                return Err(GridError::Overlap {
                    index,
                    next: index + 1,
                    reason: format!(
                        "[{}, {}) then [{}, {})",
                        pair[0].start, pair[0].end, pair[1].start, pair[1].end
                    ),
                });
            }
        }
        Ok(IntensitySeries {
            region: region.into(),
            entries,
        })
    }

    /// A single constant value over `[start, end)`.
    pub fn constant(
        region: impl Into<String>,
        start: i64,
        end: i64,
        intensity: f64,
    ) -> Result<Self, GridError> {
        Self::new(
            region,
            vec![IntensityEntry {
                start,
                end,
                intensity_kg_per_kwh: intensity,
            }],
        )
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn entries(&self) -> &[IntensityEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries that intersect `[start, end)`.
    pub fn restricted_to(&self, start: i64, end: i64) -> IntensitySeries {
        IntensitySeries {
            region: self.region.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| e.end > start && e.start < end)
                .copied()
                .collect(),
        }
    }

    /// Intensity in force at instant `t`, if covered.
    pub fn at(&self, t: i64) -> Option<f64> {
        let i = self.entries.partition_point(|e| e.end <= t);
        self.entries
            .get(i)
            .filter(|e| e.start <= t)
            .map(|e| e.intensity_kg_per_kwh)
    }
}

/// Part of one energy interval lying inside one intensity interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub energy_index: usize,
    pub intensity_index: usize,
    /// Epoch seconds; fractional only when energy durations are.
    pub start: f64,
    pub duration_s: f64,
    pub joules: f64,
    pub intensity_kg_per_kwh: f64,
}

/// Part of an energy interval with no intensity value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncoveredSpan {
    pub energy_index: usize,
    pub start: f64,
    pub duration_s: f64,
    pub joules: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    pub segments: Vec<Segment>,
    pub uncovered: Vec<UncoveredSpan>,
}

impl Alignment {
    pub fn covered_joules(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.joules)
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn uncovered_joules(&self) -> f64 {
        self.uncovered
            .iter()
            .map(|u| u.joules)
            .fold(0.0, |acc, v| acc + v)
    }
}

pub fn align_segments(energy: &EnergySeries, intensity: &IntensitySeries) -> Alignment {
    align_segments_with(energy, intensity, Execution::default())
}

pub fn align_segments_with(
    energy: &EnergySeries,
    intensity: &IntensitySeries,
    exec: Execution,
) -> Alignment {
    let per_interval = map_ordered(energy.entries(), exec, |i, e| {
        split_interval(
            i,
            e.start,
            e.duration_s,
            e.total_joules(),
            intensity.entries(),
        )
    });
    let mut out = Alignment::default();
    for (segments, uncovered) in per_interval {
        out.segments.extend(segments);
        out.uncovered.extend(uncovered);
    }
    out
}

fn split_interval(
    energy_index: usize,
    start: i64,
    duration: f64,
    joules: f64,
    intensity: &[IntensityEntry],
) -> (Vec<Segment>, Vec<UncoveredSpan>) {
    let mut segments = Vec::new();
    let mut uncovered = Vec::new();
    // Offsets are relative to `start` so epoch magnitudes never meet fractions.
    let share = |lo: f64, hi: f64| joules * ((hi - lo) / duration);
    let gap = |lo: f64, hi: f64, uncovered: &mut Vec<UncoveredSpan>| {
        uncovered.push(UncoveredSpan {
            energy_index,
            start: start as f64 + lo,
            duration_s: hi - lo,
            joules: share(lo, hi),
        })
    };

    let mut cursor = 0.0;
    let first = intensity.partition_point(|e| e.end <= start);
    for (k, e) in intensity.iter().enumerate().skip(first) {
        let lo = ((e.start - start) as f64).max(0.0);
        if lo >= duration {
            break;
        }
        let hi = ((e.end - start) as f64).min(duration);
        if lo > cursor {
            gap(cursor, lo, &mut uncovered);
        }
        segments.push(Segment {
            energy_index,
            intensity_index: k,
            start: start as f64 + lo,
            duration_s: hi - lo,
            joules: share(lo, hi),
            intensity_kg_per_kwh: e.intensity_kg_per_kwh,
        });
        cursor = hi;
    }
    if cursor < duration {
        gap(cursor, duration, &mut uncovered);
    }
    (segments, uncovered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveragePolicy {
    /// Any energy outside intensity coverage is an error.
    #[default]
    Strict,
    /// Uncovered energy is excluded from the total and listed in diagnostics.
    SkipUncovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionInterval {
    pub start: f64,
    pub duration_s: f64,
    /// Pre-PUE energy charged in this interval.
    pub joules: f64,
    pub intensity_kg_per_kwh: f64,
    pub kg_co2e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsReport {
    pub total_kg_co2e: f64,
    pub pue: PueFactor,
    pub intervals: Vec<EmissionInterval>,
    pub uncovered: Vec<UncoveredSpan>,
    /// Pre-PUE energy of the input series.
    pub input_joules: f64,
    /// Pre-PUE energy that was charged against an intensity.
    pub covered_joules: f64,
    pub uncovered_joules: f64,
}

pub fn operational_emissions(
    energy: &EnergySeries,
    intensity: &IntensitySeries,
    pue: PueFactor,
    policy: CoveragePolicy,
) -> Result<EmissionsReport, GridError> {
    operational_emissions_with(energy, intensity, pue, policy, Execution::default())
}

pub fn operational_emissions_with(
    energy: &EnergySeries,
    intensity: &IntensitySeries,
    pue: PueFactor,
    policy: CoveragePolicy,
    exec: Execution,
) -> Result<EmissionsReport, GridError> {
    let alignment = align_segments_with(energy, intensity, exec);
    if policy == CoveragePolicy::Strict {
        if let Some(gap) = alignment.uncovered.first() {
            return Err(GridError::Coverage {
                interval_start: energy.entries()[gap.energy_index].start,
                gap_start: gap.start,
                gap_end: gap.start + gap.duration_s,
                joules: gap.joules,
            });
        }
    }
    let intervals: Vec<EmissionInterval> = alignment
        .segments
        .iter()
        .map(|s| EmissionInterval {
            start: s.start,
            duration_s: s.duration_s,
            joules: s.joules,
            intensity_kg_per_kwh: s.intensity_kg_per_kwh,
            kg_co2e: pue.0 * (s.intensity_kg_per_kwh * s.joules / JOULES_PER_KWH),
        })
        .collect();
    Ok(EmissionsReport {
        total_kg_co2e: intervals
            .iter()
            .map(|i| i.kg_co2e)
            .fold(0.0, |acc, v| acc + v),
        pue,
        input_joules: energy.total_joules(),
        covered_joules: alignment.covered_joules(),
        uncovered_joules: alignment.uncovered_joules(),
        intervals,
        uncovered: alignment.uncovered,
    })
}
