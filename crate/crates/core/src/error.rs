use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Ingest { line: usize, reason: String },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("index {index} out of range for vocabulary of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("conditional probability undefined: P({0}) = 0 under the model")]
    UndefinedConditional(String),

    #[error("infinite description length: observed pair ({row}, {col}) has zero probability")]
    InfiniteDescriptionLength { row: String, col: String },

    #[error("class {0} is not a live class")]
    DeadClass(usize),

    #[error("relation `{0}` has no trained estimator")]
    UntrainedRelation(String),

    #[error("case {case}: {reason}")]
    InvalidCase { case: usize, reason: String },

    #[error("dataset of {len} items cannot be split into {k} folds")]
    TooFewItems { len: usize, k: usize },

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("invalid model document: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
