use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("search budget of {budget} steps exhausted for p={p} (last k attempted: {last_k})")]
    BudgetExceeded { p: usize, last_k: usize, budget: u64 },

    #[error("ingest error at {location}: {message}")]
    Ingest { location: String, message: String },

    /// Pearson correlation of a constant row.
    #[error("correlation undefined: constant row")]
    UndefinedCorrelation,

    #[error("configuration error: {0}")]
    Config(String),

    /// The quorum system misses a block pair, so no schedule can exist.
    #[error("block pair ({0}, {1}) is not contained in any quorum")]
    Uncovered(usize, usize),

    #[error("cache file {path}, line {line}: {message}")]
    Cache {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn ingest(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Ingest {
            location: location.into(),
            message: message.into(),
        }
    }
}
