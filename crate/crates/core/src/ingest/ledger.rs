//! Embodied-carbon ledger documents.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{json_error, to_canonical_json, IngestError, Location};
use crate::embodied::{ConsumptionRecord, EmbodiedObject, Ledger, LedgerError};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerDoc {
    objects: Vec<EmbodiedObject>,
    records: Vec<ConsumptionRecord>,
}

pub fn parse_ledger<R: Read>(input: R) -> Result<Ledger, IngestError> {
    let doc: LedgerDoc = serde_json::from_reader(input).map_err(json_error)?;
    let object_path = |id: &str, nth: usize| {
        let i = doc
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.id == id)
            .nth(nth)
            .map(|(i, _)| i)
            .unwrap_or(0);
        Location::Path(format!("objects[{i}]"))
    };
    let step_path =
        |record: usize, step: usize| Location::Path(format!("records[{record}].profile[{step}]"));

    Ledger::new(doc.objects.clone(), doc.records.clone()).map_err(|e| match e {
        LedgerError::Reference { record, object_id } => IngestError::Reference {
            location: Location::Path(format!("records[{record}].object_id")),
            object_id,
        },
        LedgerError::Oversubscription {
            object_id,
            instant,
            total,
        } => IngestError::Oversubscription {
            location: object_path(&object_id, 0),
            object_id,
            instant,
            total,
        },
        LedgerError::InvalidObject { ref id, .. } => IngestError::Invalid {
            location: object_path(id, 0),
            message: e.to_string(),
        },
        LedgerError::DuplicateObject(ref id) => IngestError::Invalid {
            location: object_path(id, 1),
            message: e.to_string(),
        },
        LedgerError::Fraction { record, step, .. }
        | LedgerError::ProfileOrder { record, step, .. }
        | LedgerError::ProfileOutOfLifespan { record, step, .. } => IngestError::Invalid {
            location: step_path(record, step),
            message: e.to_string(),
        },
        LedgerError::UnknownObject(_) | LedgerError::Duration { .. } => IngestError::Invalid {
            location: Location::Path("records".into()),
            message: e.to_string(),
        },
    })
}

pub fn serialize_ledger(ledger: &Ledger) -> String {
    to_canonical_json(&LedgerDoc {
        objects: ledger.objects().to_vec(),
        records: ledger.records().to_vec(),
    })
}
