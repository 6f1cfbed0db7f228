use thiserror::Error;

use crate::point::Point;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
///
/// Variants are split along the CLI exit-code contract: [`Error::is_malformed_input`]
/// distinguishes unreadable or structurally invalid input from domain failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} variables, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("variable index {index} out of range for {n_vars} variables")]
    VariableIndex { index: usize, n_vars: usize },

    #[error("denominator is the zero polynomial")]
    ZeroDenominator,

    #[error("point {point} is outside the domain: |denominator| = {denom_abs:e}")]
    DomainViolation { point: Point, denom_abs: f64 },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error(
        "function is unbounded near {point}: numerator vanishes to order {numer_order} \
         but denominator to order {n_min}"
    )]
    Unbounded {
        point: String,
        numer_order: usize,
        n_min: usize,
    },

    #[error("invalid direction {direction}: {reason}")]
    InvalidDirection { direction: String, reason: String },

    #[error("direction {direction} is unsafe: pencil polynomial f_{n_min} vanishes there (value {value:e})")]
    UnsafeDirection {
        direction: String,
        n_min: usize,
        value: f64,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("tail of the trace is not monotone at index {index}")]
    NonMonotoneTail { index: usize },

    #[error("objective is not degree-0 homogeneous at {point}: |<grad f, x>| = {residual:e}")]
    NotHomogeneous { point: Point, residual: f64 },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model size {size} exceeds the symbolic budget {budget}")]
    SymbolicBudget { size: usize, budget: usize },

    #[error("cannot parse `{field}`: {reason}")]
    Parse { field: String, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    /// True for errors caused by unreadable or structurally invalid input
    /// (as opposed to well-formed input hitting a mathematical obstruction).
    pub fn is_malformed_input(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidTrace(_)
                | Error::Io { .. }
                | Error::ShapeMismatch(_)
                | Error::Dimension { .. }
                | Error::NonFinite { .. }
        )
    }

    pub fn parse(field: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            field: field.into(),
            reason: reason.to_string(),
        }
    }

    pub fn config(field: impl Into<String>, reason: impl ToString) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.to_string(),
        }
    }
}
