//! Carbon footprint estimation for software workloads.
//!
//! The pipeline turns a usage trace into energy with a TDP-anchored linear
//! server model ([`model`]), scales it by facility PUE and charges it against
//! a piecewise-constant grid intensity ([`grid`]), adds lifecycle emissions
//! of the hardware attributed by time and share ([`embodied`]), and divides
//! the sum over a functional unit ([`sci`]).
//!
//! Batch operations take an [`Execution`] and run on rayon when the
//! `parallel` feature is enabled (the default).

pub mod embodied;
pub mod error;
pub mod exec;
pub mod grid;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod sci;

pub use embodied::{
    attribute_shared, attribute_simple, lifecycle_total, ConsumptionRecord, EmbodiedObject, Ledger,
    LedgerError, SharingProfile, SharingStep,
};
pub use error::Error;
pub use exec::Execution;
pub use grid::{
    align_segments, apply_pue, operational_emissions, CoveragePolicy, EmissionsReport, GridError,
    IntensityEntry, IntensitySeries, PueFactor, JOULES_PER_KWH,
};
pub use model::{
    validate_spec, Component, EnergySeries, ModelError, PerComponent, PowerBreakdown, RangePolicy,
    ServerModel, ServerSpec, UsageSample, UsageTrace,
};
pub use report::{Report, ReportKind};
pub use sci::{overhead_split, sci, total_carbon, CarbonTotals, FunctionalUnit, SciError};
