use thiserror::Error;

use crate::embodied::LedgerError;
use crate::grid::GridError;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::sci::SciError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{}{source}", .row.map(|r| format!("trace row {r}: ")).unwrap_or_default())]
    Sample {
        index: usize,
        row: Option<u64>,
        source: ModelError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Sci(#[from] SciError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl Error {
    /// IO, network and cache failures as opposed to invalid input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Ingest(e) if e.is_io())
    }
}
