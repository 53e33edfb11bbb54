//! Usage traces as CSV or JSON.
//!
//! CSV header, fixed order:
//! `timestamp_utc,duration_s,u_cpu_cores,u_mem_bytes,u_io_bytes,u_net_bytes`.
//! JSON: `{"units": {...}?, "samples": [{<same keys>}]}`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{json_error, to_canonical_json, IngestError, Location};
use crate::model::{check_order, ModelError, UsageSample, UsageTrace, UsageUnits};

pub const CSV_HEADER: [&str; 6] = [
    "timestamp_utc",
    "duration_s",
    "u_cpu_cores",
    "u_mem_bytes",
    "u_io_bytes",
    "u_net_bytes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

impl TraceFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TraceFormat::Json,
            _ => TraceFormat::Csv,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<UsageUnits>,
    samples: Vec<SampleRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRow {
    timestamp_utc: i64,
    duration_s: f64,
    u_cpu_cores: f64,
    u_mem_bytes: f64,
    u_io_bytes: f64,
    u_net_bytes: f64,
}

impl From<&SampleRow> for UsageSample {
    fn from(r: &SampleRow) -> Self {
        UsageSample {
            start: r.timestamp_utc,
            duration_s: r.duration_s,
            u_cpu: r.u_cpu_cores,
            u_mem: r.u_mem_bytes,
            u_io: r.u_io_bytes,
            u_net: r.u_net_bytes,
        }
    }
}

impl From<&UsageSample> for SampleRow {
    fn from(s: &UsageSample) -> Self {
        SampleRow {
            timestamp_utc: s.start,
            duration_s: s.duration_s,
            u_cpu_cores: s.u_cpu,
            u_mem_bytes: s.u_mem,
            u_io_bytes: s.u_io,
            u_net_bytes: s.u_net,
        }
    }
}

pub fn parse_usage_trace<R: Read>(
    input: R,
    format: TraceFormat,
) -> Result<UsageTrace, IngestError> {
    match format {
        TraceFormat::Csv => parse_csv(input),
        TraceFormat::Json => parse_json(input),
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let location = match e.position() {
        Some(p) => Location::Row(p.line()),
        None => Location::Byte(0),
    };
    IngestError::Parse {
        location,
        message: e.to_string(),
    }
}

fn parse_csv<R: Read>(input: R) -> Result<UsageTrace, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    let header_loc = Location::Row(1);
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::Schema {
            location: header_loc,
            message: "missing header row".into(),
        });
    }
    for expected in CSV_HEADER {
        if !header.iter().any(|h| h == expected) {
            return Err(IngestError::Schema {
                location: header_loc,
                message: format!("missing column `{expected}`"),
            });
        }
    }
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::Schema {
            location: header_loc,
            message: format!(
                "header must be exactly `{}`, got `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<f64, IngestError> {
            let raw = &record[i];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IngestError::Parse {
                    location: Location::Row(row),
                    message: format!("column `{}`: `{raw}` is not a finite number", CSV_HEADER[i]),
                }),
            }
        };
        let start = record[0].parse::<i64>().map_err(|_| IngestError::Parse {
            location: Location::Row(row),
            message: format!(
                "column `timestamp_utc`: `{}` is not an integer epoch second",
                &record[0]
            ),
        })?;
        let sample = UsageSample {
            start,
            duration_s: field(1)?,
            u_cpu: field(2)?,
            u_mem: field(3)?,
            u_io: field(4)?,
            u_net: field(5)?,
        };
        check_sample(&sample, samples.len(), Location::Row(row))?;
        samples.push(sample);
        rows.push(row);
    }
    check_order(&samples).map_err(|e| order_error(e, |i| Location::Row(rows[i])))?;
    Ok(UsageTrace {
        samples,
        rows,
        units: None,
    })
}

fn parse_json<R: Read>(input: R) -> Result<UsageTrace, IngestError> {
    let doc: TraceDoc = serde_json::from_reader(input).map_err(json_error)?;
    let samples: Vec<UsageSample> = doc.samples.iter().map(UsageSample::from).collect();
    for (i, s) in samples.iter().enumerate() {
        check_sample(s, i, Location::Path(format!("samples[{i}]")))?;
    }
    check_order(&samples)
        .map_err(|e| order_error(e, |i| Location::Path(format!("samples[{i}]"))))?;
    Ok(UsageTrace {
        samples,
        rows: Vec::new(),
        units: doc.units,
    })
}

fn check_sample(sample: &UsageSample, index: usize, location: Location) -> Result<(), IngestError> {
    sample.check(index).map_err(|e| IngestError::Parse {
        location,
        message: match e {
            ModelError::InvalidSample { reason, .. } => reason,
            other => other.to_string(),
        },
    })
}

fn order_error(e: ModelError, locate: impl Fn(usize) -> Location) -> IngestError {
    match e {
        ModelError::TraceOrder { index, reason } => IngestError::TraceOrder {
            location: locate(index),
            message: reason,
        },
        other => IngestError::Invalid {
            location: locate(0),
            message: other.to_string(),
        },
    }
}

pub fn serialize_usage_trace(trace: &UsageTrace, format: TraceFormat) -> String {
    match format {
        TraceFormat::Csv => {
            let mut out = CSV_HEADER.join(",");
            out.push('\n');
            for s in &trace.samples {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.start, s.duration_s, s.u_cpu, s.u_mem, s.u_io, s.u_net
                ));
            }
            out
        }
        TraceFormat::Json => to_canonical_json(&TraceDoc {
            units: trace.units,
            samples: trace.samples.iter().map(SampleRow::from).collect(),
        }),
    }
}
