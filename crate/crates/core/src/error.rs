use alloc::string::String;

/// Errors produced while encoding data, fitting models or sampling.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("continuous column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dataset has observations in only one treatment arm")]
    SingleArm,

    #[error("fit did not converge: {0}")]
    Convergence(String),

    #[error("chain {chain}: no finite starting point after {attempts} attempts")]
    Initialization { chain: usize, attempts: usize },

    #[error("need at least 2 posterior draws, got {0}")]
    TooFewDraws(usize),

    #[error("missing parameter block `{0}`")]
    MissingBlock(String),
}

pub type Result<T> = core::result::Result<T, Error>;
