//! Loading and validating external inputs.
//!
//! Every parse failure carries a [`Location`] pointing into the source: a
//! line/column for syntax errors, a CSV row for trace rows, or a JSON path
//! such as `entries[3]` for semantic errors on an otherwise well-formed
//! document. Serializers emit the canonical form the parsers read back
//! byte for byte.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod feed;
pub mod fetch;
pub mod ledger;
pub mod trace;

pub use config::{load_config, parse_config, IntensitySource, OutputFormat, RunConfig};
pub use feed::{parse_intensity_feed, serialize_intensity_feed};
pub use fetch::{FeedCacheEntry, FeedClient, Window};
pub use ledger::{parse_ledger, serialize_ledger};
pub use trace::{parse_usage_trace, serialize_usage_trace, TraceFormat};

/// Where in an input an error was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column.
    Line { line: u64, column: u64 },
    /// 1-based CSV line, header included.
    Row(u64),
    /// Byte offset from the start of the input.
    Byte(u64),
    /// JSON path of the offending element.
    Path(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line { line, column } => write!(f, "line {line}, column {column}"),
            Location::Row(r) => write!(f, "row {r}"),
            Location::Byte(b) => write!(f, "byte {b}"),
            Location::Path(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("schema error at {location}: {message}")]
    Schema { location: Location, message: String },
    #[error("trace order error at {location}: {message}")]
    TraceOrder { location: Location, message: String },
    #[error("overlapping intensity entries at {location}: {message}")]
    Overlap { location: Location, message: String },
    #[error("negative intensity at {location}: {value}")]
    NegativeIntensity { location: Location, value: f64 },
    #[error("oversubscription at {location}: object {object_id} shared {total} > 1 at instant {instant}")]
    Oversubscription {
        location: Location,
        object_id: String,
        instant: i64,
        total: f64,
    },
    #[error("dangling reference at {location}: unknown object {object_id}")]
    Reference {
        location: Location,
        object_id: String,
    },
    #[error("invalid value at {location}: {message}")]
    Invalid { location: Location, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("cached intensity for {region} is {age_s} s old, beyond the {freshness_s} s freshness window")]
    StaleCache {
        region: String,
        age_s: i64,
        freshness_s: u64,
    },
}

impl IngestError {
    pub fn location(&self) -> Option<&Location> {
        match self {
            IngestError::Parse { location, .. }
            | IngestError::Schema { location, .. }
            | IngestError::TraceOrder { location, .. }
            | IngestError::Overlap { location, .. }
            | IngestError::NegativeIntensity { location, .. }
            | IngestError::Oversubscription { location, .. }
            | IngestError::Reference { location, .. }
            | IngestError::Invalid { location, .. } => Some(location),
            IngestError::Io { .. }
            | IngestError::Network { .. }
            | IngestError::StaleCache { .. } => None,
        }
    }

    /// IO, network and cache failures as opposed to bad input.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            IngestError::Io { .. } | IngestError::Network { .. } | IngestError::StaleCache { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn json_error(e: serde_json::Error) -> IngestError {
    IngestError::Parse {
        location: Location::Line {
            line: e.line() as u64,
            column: e.column() as u64,
        },
        message: e.to_string(),
    }
}

/// Canonical JSON: two-space indent, trailing newline.
pub(crate) fn to_canonical_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization");
    s.push('\n');
    s
}
