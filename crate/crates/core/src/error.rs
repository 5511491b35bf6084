use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A generative or algorithm parameter violates its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A row or column index is outside the matrix.
    #[error("index {index} out of range for {axis} of length {len}")]
    OutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    /// There is nothing to recommend from.
    #[error("empty candidate set for user {0}")]
    NoCandidates(usize),
    /// A bound was queried outside the hypothesis under which it holds.
    #[error("bound hypothesis violated: {0}")]
    Domain(String),
    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(axis: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::OutOfRange { axis, index, len })
    }
}
