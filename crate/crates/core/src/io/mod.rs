//! File formats: Touchstone v1 network data and CSV traces and matrices.

pub mod csv;
pub mod touchstone;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("I/O error on {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("CSV error: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })
}
