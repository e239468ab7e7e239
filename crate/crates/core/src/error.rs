use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rating scale: {0}")]
    InvalidScale(String),
    #[error("rating level index {level} out of range for a scale of {levels} levels")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("product index {index} out of range for {n_products} products")]
    ProductOutOfRange { index: usize, n_products: usize },
    #[error("ratings vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("pmf operands are defined over different rating scales")]
    ScaleMismatch,
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("absolute continuity violated: p({level}) > 0 but q({level}) = 0")]
    AbsoluteContinuityViolation { level: usize },
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSumViolation(f64),
    #[error("not a permutation of 0..{0}")]
    InvalidOrder(usize),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("operation requires the binary rating scale")]
    NonBinaryScale,
    #[error("predictor does not emit a pmf; only the rms measure is defined for it")]
    NotProbabilistic,
    #[error("enumeration of {0} histories exceeds the guard")]
    EnumerationTooLarge(f64),
    #[error("dense table of {0} types exceeds the guard")]
    TooLarge(f64),
    #[error("conditioning event has zero probability")]
    ZeroEvidence,
    #[error("worst-case instance requires an even product count, got {0}")]
    OddN(usize),
    #[error("ratings vector {index} has {found} ratings, {needed} needed")]
    InsufficientHistory {
        index: usize,
        found: usize,
        needed: usize,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: unknown rating value {raw}")]
    UnknownRatingValue {
        path: PathBuf,
        line: usize,
        raw: String,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
