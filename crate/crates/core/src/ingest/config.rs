//! Run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{json_error, IngestError, Location};
use crate::grid::{CoveragePolicy, PueFactor};
use crate::model::{validate_spec, RangePolicy, ServerSpec};
use crate::sci::FunctionalUnit;

pub const DEFAULT_FRESHNESS_S: u64 = 1800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensitySource {
    File(PathBuf),
    Endpoint {
        endpoint: String,
        region: String,
        freshness_s: u64,
        strict_freshness: bool,
        /// Environment variable holding a bearer token, if the provider needs one.
        token_env: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub server: ServerSpec,
    pub pue: PueFactor,
    pub intensity: IntensitySource,
    pub coverage_policy: CoveragePolicy,
    pub functional_unit: FunctionalUnit,
    pub clamp_usage: bool,
    pub output: OutputFormat,
    /// Hex SHA-256 of the raw config bytes.
    pub digest: String,
}

impl RunConfig {
    pub fn range_policy(&self) -> RangePolicy {
        if self.clamp_usage {
            RangePolicy::Clamp
        } else {
            RangePolicy::Reject
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    server: ServerSpec,
    pue: f64,
    intensity: IntensityDoc,
    #[serde(default)]
    coverage_policy: CoveragePolicy,
    functional_unit: FunctionalUnit,
    #[serde(default)]
    clamp_usage: bool,
    #[serde(default)]
    output: OutputFormat,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntensityDoc {
    file: Option<PathBuf>,
    endpoint: Option<String>,
    region: Option<String>,
    freshness_s: Option<u64>,
    strict_freshness: Option<bool>,
    token_env: Option<String>,
}

fn invalid(path: &str, message: impl Into<String>) -> IngestError {
    IngestError::Invalid {
        location: Location::Path(path.into()),
        message: message.into(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses config bytes. Relative intensity file paths resolve against `base_dir`.
pub fn parse_config(bytes: &[u8], base_dir: &Path) -> Result<RunConfig, IngestError> {
    let doc: ConfigDoc = serde_json::from_slice(bytes).map_err(json_error)?;
    let server = validate_spec(doc.server).map_err(|e| invalid("server", e.to_string()))?;
    let pue = PueFactor::new(doc.pue).map_err(|e| invalid("pue", e.to_string()))?;
    if !(doc.functional_unit.count.is_finite() && doc.functional_unit.count > 0.0) {
        return Err(invalid(
            "functional_unit.count",
            format!("must be > 0, got {}", doc.functional_unit.count),
        ));
    }

    let i = doc.intensity;
    let intensity = match (i.file, i.endpoint) {
        (Some(file), None) => {
            if i.region.is_some()
                || i.freshness_s.is_some()
                || i.strict_freshness.is_some()
                || i.token_env.is_some()
            {
                return Err(invalid(
                    "intensity",
                    "endpoint options given with a file source",
                ));
            }
            let path = if file.is_absolute() {
                file
            } else {
                base_dir.join(file)
            };
            if !path.is_file() {
                return Err(IngestError::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "intensity file not found"),
                ));
            }
            IntensitySource::File(path)
        }
        (None, Some(endpoint)) => {
            let region = i
                .region
                .ok_or_else(|| invalid("intensity.region", "required with an endpoint"))?;
            IntensitySource::Endpoint {
                endpoint,
                region,
                freshness_s: i.freshness_s.unwrap_or(DEFAULT_FRESHNESS_S),
                strict_freshness: i.strict_freshness.unwrap_or(false),
                token_env: i.token_env,
            }
        }
        (Some(_), Some(_)) => {
            return Err(invalid(
                "intensity",
                "give either `file` or `endpoint`, not both",
            ))
        }
        (None, None) => {
            return Err(invalid(
                "intensity",
                "one of `file` or `endpoint` is required",
            ))
        }
    };

    Ok(RunConfig {
        server,
        pue,
        intensity,
        coverage_policy: doc.coverage_policy,
        functional_unit: doc.functional_unit,
        clamp_usage: doc.clamp_usage,
        output: doc.output,
        digest: sha256_hex(bytes),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&bytes, base)
}
