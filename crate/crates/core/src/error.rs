use thiserror::Error;

/// Which coordinate broke monotonicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    S,
    T,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::S => f.write_str("s"),
            Axis::T => f.write_str("t"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("condition D violated at index {index}: {axis} is not strictly increasing")]
    ConditionDViolation { index: usize, axis: Axis },

    #[error("nonpositive coordinate at index {index}")]
    NonpositiveCoordinate { index: usize },

    #[error("degenerate design: skewed increment {skewed:e} at index {index} is below the floor {floor:e}")]
    DegenerateDesign { index: usize, skewed: f64, floor: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix order {order} exceeds the dense size cap {cap}")]
    SizeCap { order: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
