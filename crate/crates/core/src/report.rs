//! Report documents and their JSON / CSV renderings.
//!
//! Internals work in joules; energies are converted to kWh here and nowhere
//! else. Floats go through shortest round-trip formatting in both renderings,
//! so identical inputs give byte-identical output.

use serde::Serialize;

use crate::embodied::{ConsumerAttribution, Ledger, ObjectBalance};
use crate::exec::Execution;
use crate::grid::{EmissionsReport, JOULES_PER_KWH};
use crate::ingest::to_canonical_json;
use crate::ingest::Window;
use crate::model::{EnergyBreakdown, EnergySeries};
use crate::sci::CarbonTotals;

pub const TOOL_NAME: &str = "carbondef";
pub const SCHEMA_VERSION: &str = "1";

fn kwh(joules: f64) -> f64 {
    joules / JOULES_PER_KWH
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Estimate,
    Emissions,
    Embodied,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: &'static str,
    pub kind: ReportKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger_digest: Option<String>,
    /// Span of the usage trace; reports carry no wall-clock time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_window: Option<Window>,
}

impl Metadata {
    pub fn new(kind: ReportKind) -> Self {
        Metadata {
            tool: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            kind,
            config_digest: None,
            trace_digest: None,
            ledger_digest: None,
            trace_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentKwh {
    pub cpu: f64,
    pub mem: f64,
    pub io: f64,
    pub net: f64,
    pub idle: f64,
}

impl From<&EnergyBreakdown> for ComponentKwh {
    fn from(j: &EnergyBreakdown) -> Self {
        ComponentKwh {
            cpu: kwh(j.cpu),
            mem: kwh(j.mem),
            io: kwh(j.io),
            net: kwh(j.net),
            idle: kwh(j.idle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub start: i64,
    pub duration_s: f64,
    pub total_kwh: f64,
    pub kwh: ComponentKwh,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySection {
    pub intervals_count: usize,
    pub total_kwh: f64,
    pub by_component_kwh: ComponentKwh,
    pub intervals: Vec<EnergyRow>,
}

impl EnergySection {
    pub fn from_series(series: &EnergySeries) -> Self {
        let totals = series.component_totals();
        EnergySection {
            intervals_count: series.len(),
            total_kwh: kwh(series.total_joules()),
            by_component_kwh: ComponentKwh::from(&totals),
            intervals: series
                .entries()
                .iter()
                .map(|e| EnergyRow {
                    start: e.start,
                    duration_s: e.duration_s,
                    total_kwh: kwh(e.joules.total),
                    kwh: ComponentKwh::from(&e.joules),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionRow {
    pub start: f64,
    pub duration_s: f64,
    pub kwh: f64,
    pub intensity_kg_per_kwh: f64,
    pub kg_co2e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationalSection {
    pub region: String,
    pub pue: f64,
    pub input_kwh: f64,
    pub covered_kwh: f64,
    pub uncovered_kwh: f64,
    /// Covered energy before PUE.
    pub software_kwh: f64,
    /// Facility overhead on top of `software_kwh`.
    pub overhead_kwh: f64,
    pub total_kg_co2e: f64,
    pub intervals: Vec<EmissionRow>,
}

impl OperationalSection {
    pub fn from_report(report: &EmissionsReport, region: &str) -> Self {
        let split = report.overhead_split();
        OperationalSection {
            region: region.to_string(),
            pue: report.pue.value(),
            input_kwh: kwh(report.input_joules),
            covered_kwh: kwh(report.covered_joules),
            uncovered_kwh: kwh(report.uncovered_joules),
            software_kwh: kwh(split.software_joules),
            overhead_kwh: kwh(split.overhead_joules),
            total_kg_co2e: report.total_kg_co2e,
            intervals: report
                .intervals
                .iter()
                .map(|i| EmissionRow {
                    start: i.start,
                    duration_s: i.duration_s,
                    kwh: kwh(i.joules),
                    intensity_kg_per_kwh: i.intensity_kg_per_kwh,
                    kg_co2e: i.kg_co2e,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conservation {
    pub lifecycle_kg_co2e: f64,
    pub attributed_kg_co2e: f64,
    pub idle_residual_kg_co2e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbodiedSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consumer_filter: Option<String>,
    /// Sum over the listed consumers.
    pub total_kg_co2e: f64,
    pub consumers: Vec<ConsumerAttribution>,
    pub objects: Vec<ObjectBalance>,
    /// Ledger-wide, independent of the consumer filter.
    pub conservation: Conservation,
}

impl EmbodiedSection {
    /// The section plus any warnings (an unknown consumer id).
    pub fn from_ledger(
        ledger: &Ledger,
        consumer: Option<&str>,
        exec: Execution,
    ) -> (Self, Vec<String>) {
        let mut warnings = Vec::new();
        let consumers = match consumer {
            Some(id) => {
                if !ledger.consumers().contains(&id) {
                    warnings.push(format!(
                        "consumer {id} has no consumption records; attributing 0 kg"
                    ));
                }
                vec![ledger.consumer_embodied(id)]
            }
            None => ledger.all_consumers_with(exec),
        };
        let objects = ledger.object_balances_with(exec);
        let conservation = Conservation {
            lifecycle_kg_co2e: objects
                .iter()
                .map(|o| o.lifecycle_kg_co2e)
                .fold(0.0, |acc, v| acc + v),
            attributed_kg_co2e: objects
                .iter()
                .map(|o| o.attributed_kg_co2e)
                .fold(0.0, |acc, v| acc + v),
            idle_residual_kg_co2e: objects
                .iter()
                .map(|o| o.idle_residual_kg_co2e)
                .fold(0.0, |acc, v| acc + v),
        };
        let section = EmbodiedSection {
            consumer_filter: consumer.map(str::to_string),
            total_kg_co2e: consumers
                .iter()
                .map(|c| c.total_kg_co2e)
                .fold(0.0, |acc, v| acc + v),
            consumers,
            objects,
            conservation,
        };
        (section, warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub start: f64,
    pub duration_s: f64,
    pub kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampedRow {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub coverage_gaps: Vec<GapRow>,
    pub clamped_samples: Vec<ClampedRow>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn add_gaps(&mut self, report: &EmissionsReport) {
        self.coverage_gaps
            .extend(report.uncovered.iter().map(|u| GapRow {
                start: u.start,
                duration_s: u.duration_s,
                kwh: kwh(u.joules),
            }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operational: Option<OperationalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embodied: Option<EmbodiedSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sci: Option<CarbonTotals>,
    pub diagnostics: Diagnostics,
}

impl Report {
    pub fn new(metadata: Metadata) -> Self {
        Report {
            metadata,
            energy: None,
            operational: None,
            embodied: None,
            sci: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    /// Long-format CSV, one row per interval (or per attribution for embodied).
    pub fn to_csv(&self) -> String {
        let mut out = Csv::default();
        match self.metadata.kind {
            ReportKind::Estimate => {
                out.row(&[
                    "start",
                    "duration_s",
                    "kwh_total",
                    "kwh_cpu",
                    "kwh_mem",
                    "kwh_io",
                    "kwh_net",
                    "kwh_idle",
                ]);
                for r in self.energy.iter().flat_map(|e| &e.intervals) {
                    out.row(&[
                        &r.start.to_string(),
                        &num(r.duration_s),
                        &num(r.total_kwh),
                        &num(r.kwh.cpu),
                        &num(r.kwh.mem),
                        &num(r.kwh.io),
                        &num(r.kwh.net),
                        &num(r.kwh.idle),
                    ]);
                }
            }
            ReportKind::Emissions => {
                out.row(&[
                    "start",
                    "duration_s",
                    "kwh",
                    "intensity_kg_per_kwh",
                    "kg_co2e",
                ]);
                for r in self.operational.iter().flat_map(|o| &o.intervals) {
                    out.row(&[
                        &num(r.start),
                        &num(r.duration_s),
                        &num(r.kwh),
                        &num(r.intensity_kg_per_kwh),
                        &num(r.kg_co2e),
                    ]);
                }
            }
            ReportKind::Embodied => {
                out.row(&["row_kind", "consumer_id", "object_id", "kg_co2e"]);
                if let Some(e) = &self.embodied {
                    embodied_rows(&mut out, e);
                }
            }
            ReportKind::Report => {
                out.row(&["section", "item", "start", "duration_s", "kwh", "kg_co2e"]);
                if let Some(e) = &self.energy {
                    for r in &e.intervals {
                        out.row(&[
                            "energy",
                            "interval",
                            &r.start.to_string(),
                            &num(r.duration_s),
                            &num(r.total_kwh),
                            "",
                        ]);
                    }
                }
                if let Some(o) = &self.operational {
                    for r in &o.intervals {
                        out.row(&[
                            "operational",
                            "interval",
                            &num(r.start),
                            &num(r.duration_s),
                            &num(r.kwh),
                            &num(r.kg_co2e),
                        ]);
                    }
                    out.row(&[
                        "operational",
                        "total",
                        "",
                        "",
                        &num(o.covered_kwh),
                        &num(o.total_kg_co2e),
                    ]);
                }
                if let Some(e) = &self.embodied {
                    for c in &e.consumers {
                        out.row(&[
                            "embodied",
                            &c.consumer_id,
                            "",
                            "",
                            "",
                            &num(c.total_kg_co2e),
                        ]);
                    }
                    out.row(&["embodied", "total", "", "", "", &num(e.total_kg_co2e)]);
                }
                if let Some(s) = &self.sci {
                    out.row(&["sci", "total", "", "", "", &num(s.total_kg)]);
                    out.row(&["sci", "per_unit", "", "", "", &num(s.sci_kg_per_unit)]);
                }
            }
        }
        out.0
    }
}

fn embodied_rows(out: &mut Csv, e: &EmbodiedSection) {
    for c in &e.consumers {
        for o in &c.objects {
            out.row(&["attribution", &c.consumer_id, &o.object_id, &num(o.kg_co2e)]);
        }
        out.row(&["consumer_total", &c.consumer_id, "", &num(c.total_kg_co2e)]);
    }
    for o in &e.objects {
        out.row(&[
            "idle_residual",
            "",
            &o.object_id,
            &num(o.idle_residual_kg_co2e),
        ]);
    }
    let c = &e.conservation;
    out.row(&["lifecycle_total", "", "", &num(c.lifecycle_kg_co2e)]);
    out.row(&["attributed_total", "", "", &num(c.attributed_kg_co2e)]);
    out.row(&["idle_residual_total", "", "", &num(c.idle_residual_kg_co2e)]);
}

/// Shortest round-trip decimal, same digits serde_json would write.
fn num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}

#[derive(Default)]
struct Csv(String);

impl Csv {
    fn row(&mut self, cells: &[&str]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.0.push(',');
            }
            if c.contains([',', '"', '\n']) {
                self.0.push('"');
                self.0.push_str(&c.replace('"', "\"\""));
                self.0.push('"');
            } else {
                self.0.push_str(c);
            }
        }
        self.0.push('\n');
    }
}
