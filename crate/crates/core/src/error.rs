use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input file. `location` names a byte offset for binary formats
    /// and a 1-based row number for CSV.
    #[error("format error in {path} at {location}: {message}")]
    Format {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("cache error ({field}): {message}")]
    Cache { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format_at_byte(
        path: impl Into<PathBuf>,
        offset: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            location: format!("byte {offset}"),
            message: message.into(),
        }
    }

    pub(crate) fn format_at_row(
        path: impl Into<PathBuf>,
        row: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            location: format!("row {row}"),
            message: message.into(),
        }
    }

    pub(crate) fn cache(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Cache {
            field: field.into(),
            message: message.into(),
        }
    }
}
