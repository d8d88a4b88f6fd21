use thiserror::Error;

/// Errors raised by geometry, construction, entropy and tower operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid rectangle: lo {lo:?} is not <= hi {hi:?}")]
    InvalidRectangle { lo: Vec<i64>, hi: Vec<i64> },

    #[error("empty shape")]
    EmptyShape,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("cell budget exceeded: {needed} cells requested, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("cell {0:?} lies outside the top-level rectangle")]
    CellOutOfRange(Vec<i64>),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid tower: {0}")]
    InvalidTower(String),

    #[error("refinement failed at (k={k}, ell={ell}): {reason}")]
    Refinement { k: usize, ell: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
