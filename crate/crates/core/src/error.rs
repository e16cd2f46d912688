use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine. Data-quality issues that do not stop a run
/// are reported through [`crate::model::ValidationReport`] or warnings instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown rating {rating:?} on the {agency} scale")]
    UnknownRating { rating: String, agency: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot calibrate an empty sample")]
    EmptySample,

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sovereign position {isin} has no country")]
    UnknownCountry { isin: String },

    #[error("allocation weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("TEC/TAC coefficient table is empty")]
    EmptyTable,

    #[error("subset is empty")]
    EmptySubset,

    #[error("{file}: {message}")]
    Schema { file: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent input data rather than
    /// the filesystem.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
