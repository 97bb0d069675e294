//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("prediction batch mismatch: {0}")]
    PredictionMismatch(String),

    #[error("class pair ({i}, {j}) out of range for {num_classes} classes")]
    PairOutOfRange { i: usize, j: usize, num_classes: usize },

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: String, value: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid category set: {0}")]
    InvalidCategorySet(String),

    #[error("enumeration cap exceeded: {states} states > cap {cap}")]
    EnumerationCap { states: u128, cap: u128 },

    #[error("distribution universes differ: {0}")]
    UniverseMismatch(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("oracle learner has no row for class {0}")]
    OracleMissingClass(usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
