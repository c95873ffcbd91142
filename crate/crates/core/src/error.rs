use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty observation: ||X||_1 = 0 and no total-mass override")]
    EmptyObservation,

    #[error("invalid model matrix: {0}")]
    InvalidModel(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("truncation rank {t} out of range for dimension {k}")]
    RankOutOfRange { t: usize, k: usize },

    #[error("component index {j} out of range (have {len})")]
    ComponentOutOfRange { j: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("input too large for {what}: {size} > {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
