use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a shape or configuration contract.
    #[error("specification error: {0}")]
    Spec(String),

    /// A computation produced (or was handed) a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Profile or dataset does not match the feature schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("training error at step {step}: {message}")]
    Training { step: usize, message: String },

    /// A serialized artifact is corrupt or has the wrong version.
    #[error("format error in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
