use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("CSV header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("no rows survived ingestion ({dropped} dropped)")]
    NoRows { dropped: usize },

    #[error("category index {index} out of range for cardinality {cardinality}")]
    IndexOutOfRange { index: usize, cardinality: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("attribute `{0}` not found")]
    UnknownAttribute(String),

    #[error("attribute `{0}` is not categorical")]
    NotCategorical(String),

    #[error("histogram over {bins} bins exceeds the cap of {cap}")]
    HistogramTooLarge { bins: usize, cap: usize },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("all {0} runs diverged")]
    AllDiverged(usize),

    #[error("zero variance in reference histogram")]
    ZeroVariance,

    #[error("{0}")]
    Panel(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
