//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),

    #[error("node count {got} is below the minimum {min}")]
    TooFewNodes { got: usize, min: usize },

    #[error("row {row} of the {layer} layer sums to {sum}, not 1")]
    NotStochastic { layer: &'static str, row: usize, sum: f64 },

    #[error("negative or non-finite weight at ({row},{col}) in the {layer} layer")]
    BadWeight { layer: &'static str, row: usize, col: usize },

    #[error("{layer} layer is not strongly connected (pass the reducible override to accept)")]
    NotStronglyConnected { layer: &'static str },

    #[error("row {row} has zero weight and the zero-row policy is reject")]
    ZeroRow { row: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph is empty after component restriction")]
    EmptyAfterRestriction,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear system is numerically singular")]
    Singular,

    #[error("subset enumeration over {0} controllable nodes exceeds the cap; pass an explicit cardinality cap")]
    EnumerationCap(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
