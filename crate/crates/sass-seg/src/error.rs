//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated (bad parameter range,
    /// empty input, odd window, ...).
    #[error("{0}")]
    InvalidArgument(String),

    /// Two buffers that must share dimensions do not.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but its contents are not what we expect.
    #[error("{path}: {msg}")]
    FileFormat { path: PathBuf, msg: String },

    /// A manifest row failed validation; `row` is 1-based and counts the
    /// header line.
    #[error("manifest row {row}: {msg}")]
    Manifest { row: usize, msg: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimMismatch(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::FileFormat {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
