use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column `{0}` not found in header")]
    MissingTargetColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("data body is empty")]
    EmptyData,
    #[error("shape mismatch: expected {expected} columns, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{what} = {value} out of range ({range})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        range: String,
    },
    #[error("cannot parse expression: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, value: usize, range: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            value,
            range: range.into(),
        }
    }
}
