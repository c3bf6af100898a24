use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bytes on disk do not match the expected container layout.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Data decoded fine but violates a value constraint (NaN, bad row sum, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Invalid parameter or configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Scoring needs model outputs that are not on disk.
    #[error("missing model outputs for frames: {}", .0.join(", "))]
    MissingModelFiles(Vec<String>),

    /// The caller broke an API contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::MissingModelFiles(_) => 3,
            Error::Format { .. } | Error::Validation(_) | Error::Json { .. } => 4,
            // A file that cannot be opened is reported like a malformed one.
            Error::Io { .. } => 4,
        }
    }
}
