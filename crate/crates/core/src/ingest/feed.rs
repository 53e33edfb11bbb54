//! Carbon-intensity feed documents.
//!
//! `{"region": "...", "entries": [{"start": s, "end": s, "intensity_kg_per_kwh": x}]}`

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{json_error, to_canonical_json, IngestError, Location};
use crate::grid::{GridError, IntensityEntry, IntensitySeries};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FeedDoc {
    pub region: String,
    pub entries: Vec<IntensityEntry>,
}

pub fn parse_intensity_feed<R: Read>(input: R) -> Result<IntensitySeries, IngestError> {
    let doc: FeedDoc = serde_json::from_reader(input).map_err(json_error)?;
    series_from_doc(doc)
}

pub(crate) fn series_from_doc(doc: FeedDoc) -> Result<IntensitySeries, IngestError> {
    let entries = doc.entries.clone();
    IntensitySeries::new(doc.region, doc.entries).map_err(|e| match e {
        GridError::Overlap { next, reason, .. } => IngestError::Overlap {
            location: Location::Path(format!("entries[{next}]")),
            message: reason,
        },
        GridError::InvalidIntensity { index, reason } => {
            let value = entries[index].intensity_kg_per_kwh;
            let location = Location::Path(format!("entries[{index}]"));
            if value < 0.0 {
                IngestError::NegativeIntensity { location, value }
            } else {
                IngestError::Invalid {
                    location,
                    message: reason,
                }
            }
        }
        other => IngestError::Invalid {
            location: Location::Path("entries".into()),
            message: other.to_string(),
        },
    })
}

pub fn serialize_intensity_feed(series: &IntensitySeries) -> String {
    to_canonical_json(&FeedDoc {
        region: series.region().to_string(),
        entries: series.entries().to_vec(),
    })
}
