use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("cannot parse {value:?} at row {row}, column {column:?}")]
    Unparseable { row: usize, column: String, value: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("target column: {0}")]
    Target(String),
    #[error("column {column:?} has no observed cells")]
    AllMissing { column: String },
    #[error("column {column:?} has {found} observed cells, {needed} needed")]
    TooFewKnots {
        column: String,
        needed: usize,
        found: usize,
    },
    #[error("row {row} has no observed feature values")]
    EmptyRow { row: usize },
    #[error("dataset already has missing feature cells")]
    PreexistingMissing,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("amputation constraint unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("coordinate ({row}, {col}) out of bounds")]
    OutOfBounds { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by how the library was called (bad parameters
    /// or configuration) rather than by the data or the file system.
    pub fn is_usage_error(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => true,
            Error::Context { source, .. } => source.is_usage_error(),
            _ => false,
        }
    }
}
