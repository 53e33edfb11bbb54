//! End-to-end runs: usage trace to energy, emissions, embodied carbon and SCI.

use std::path::Path;

use crate::embodied::Ledger;
use crate::error::Error;
use crate::exec::Execution;
use crate::grid::{operational_emissions_with, CoveragePolicy, IntensitySeries};
use crate::ingest::{
    parse_intensity_feed, FeedClient, IngestError, IntensitySource, RunConfig, Window,
};
use crate::model::{EnergySeries, ModelError, ServerModel, UsageTrace};
use crate::report::{
    ClampedRow, EmbodiedSection, EnergySection, Metadata, OperationalSection, Report,
};
use crate::sci::CarbonTotals;

/// Knobs a caller can override on top of the run config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub strict_coverage: bool,
    pub clamp_usage: bool,
}

impl Overrides {
    fn coverage(&self, config: &RunConfig) -> CoveragePolicy {
        if self.strict_coverage {
            CoveragePolicy::Strict
        } else {
            config.coverage_policy
        }
    }
}

/// Loads the intensity series the config points at, covering the trace window.
pub fn resolve_intensity(
    config: &RunConfig,
    trace: &UsageTrace,
    cache_dir: &Path,
) -> Result<IntensitySeries, IngestError> {
    match &config.intensity {
        IntensitySource::File(path) => {
            let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
            parse_intensity_feed(std::io::BufReader::new(file))
        }
        IntensitySource::Endpoint {
            endpoint,
            region,
            freshness_s,
            strict_freshness,
            token_env,
        } => {
            let Some((start, end)) = trace.window() else {
                return Ok(IntensitySeries::new(region.clone(), Vec::new())
                    .expect("empty series is valid"));
            };
            let token = token_env.as_ref().and_then(|v| std::env::var(v).ok());
            FeedClient::new(endpoint.clone(), cache_dir)
                .with_freshness(*freshness_s)
                .with_strict_freshness(*strict_freshness)
                .with_bearer_token(token)
                .fetch_intensity(region, Window { start, end })
        }
    }
}

fn energy(
    config: &RunConfig,
    trace: &UsageTrace,
    o: Overrides,
    exec: Execution,
) -> Result<EnergySeries, Error> {
    let model = ServerModel::new(config.server.clone())?;
    let policy = if o.clamp_usage {
        crate::model::RangePolicy::Clamp
    } else {
        config.range_policy()
    };
    model
        .trace_to_energy_series_with(trace, policy, exec)
        .map_err(|e| match e {
            ModelError::UsageOutOfRange { index, .. }
            | ModelError::InvalidSample { index, .. }
            | ModelError::TraceOrder { index, .. } => Error::Sample {
                index,
                row: trace.row_of(index),
                source: e,
            },
            other => Error::Model(other),
        })
}

fn clamped_rows(series: &EnergySeries, trace: &UsageTrace) -> Vec<ClampedRow> {
    series
        .clamped()
        .iter()
        .map(|&index| ClampedRow {
            index,
            row: trace.row_of(index),
        })
        .collect()
}

pub fn run_estimate(
    config: &RunConfig,
    trace: &UsageTrace,
    metadata: Metadata,
    overrides: Overrides,
    exec: Execution,
) -> Result<Report, Error> {
    let series = energy(config, trace, overrides, exec)?;
    let mut report = Report::new(metadata);
    report.diagnostics.clamped_samples = clamped_rows(&series, trace);
    report.energy = Some(EnergySection::from_series(&series));
    Ok(report)
}

pub fn run_emissions(
    config: &RunConfig,
    trace: &UsageTrace,
    intensity: &IntensitySeries,
    metadata: Metadata,
    overrides: Overrides,
    exec: Execution,
) -> Result<Report, Error> {
    let series = energy(config, trace, overrides, exec)?;
    let emissions = operational_emissions_with(
        &series,
        intensity,
        config.pue,
        overrides.coverage(config),
        exec,
    )?;
    let mut report = Report::new(metadata);
    report.diagnostics.clamped_samples = clamped_rows(&series, trace);
    report.diagnostics.add_gaps(&emissions);
    report.energy = Some(EnergySection::from_series(&series));
    report.operational = Some(OperationalSection::from_report(
        &emissions,
        intensity.region(),
    ));
    Ok(report)
}

pub fn run_embodied(
    ledger: &Ledger,
    consumer: Option<&str>,
    metadata: Metadata,
    exec: Execution,
) -> Report {
    let (section, warnings) = EmbodiedSection::from_ledger(ledger, consumer, exec);
    let mut report = Report::new(metadata);
    report.diagnostics.warnings = warnings;
    report.embodied = Some(section);
    report
}

/// Operational plus embodied emissions for the same window, divided over the
/// configured functional unit. Without `consumer` every consumer in the
/// ledger counts towards the embodied share; idle residuals never do.
#[allow(clippy::too_many_arguments)]
pub fn run_full(
    config: &RunConfig,
    trace: &UsageTrace,
    intensity: &IntensitySeries,
    ledger: &Ledger,
    consumer: Option<&str>,
    metadata: Metadata,
    overrides: Overrides,
    exec: Execution,
) -> Result<Report, Error> {
    let mut report = run_emissions(config, trace, intensity, metadata, overrides, exec)?;
    let (section, warnings) = EmbodiedSection::from_ledger(ledger, consumer, exec);
    let operational_kg = report.operational.as_ref().map_or(0.0, |o| o.total_kg_co2e);
    report.sci = Some(CarbonTotals::compose(
        operational_kg,
        section.total_kg_co2e,
        &config.functional_unit,
    )?);
    report.diagnostics.warnings = warnings;
    report.embodied = Some(section);
    Ok(report)
}
