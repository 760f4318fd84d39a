use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or parameter values the operation cannot accept.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Diverged { epoch: usize, what: &'static str },

    #[error("weights cannot be normalized: every weight is zero")]
    NormalizationUndefined,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("malformed csv at row {row}: {message}")]
    MalformedCsv { row: usize, message: String },

    #[error("sample has no rows")]
    EmptySample,

    #[error("record line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
