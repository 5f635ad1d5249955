use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators, transformations and data plumbing.
#[derive(Debug, Error)]
pub enum HtlError {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular inverse: {0}")]
    Singular(String),

    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<HtlError>,
    },

    #[error("kernel system could not be factorized (last jitter {jitter:e})")]
    Conditioning { jitter: f64 },

    #[error("stability coefficients are undefined: {0}")]
    UndefinedStability(&'static str),

    #[error("pooled variance needs at least one point with two or more replicates")]
    InsufficientReplicates,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: file has no header line", .0.display())]
    EmptyFile(PathBuf),

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column {column:?}: cannot parse {cell:?} as a finite real")]
    NonNumeric {
        line: usize,
        column: String,
        cell: String,
    },

    #[error("label column {0} not present in header")]
    MissingLabelColumn(String),

    #[error("split leaves the training part empty")]
    EmptyTrainingSplit,

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("labels are constant, total sum of squares is zero")]
    DegenerateLabels,

    #[error("{folds}-fold cross-validation needs at least {folds} rows, found {rows}")]
    TooFewRows { folds: usize, rows: usize },
}

pub type Result<T> = std::result::Result<T, HtlError>;

impl HtlError {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        HtlError::Domain {
            what,
            value,
            expected,
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Self {
        HtlError::AtRow {
            row,
            source: Box::new(self),
        }
    }
}
