use thiserror::Error;

/// Errors produced by the ensemble library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("I/O error reading {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate timestamp {timestamp} on line {line}")]
    DuplicateTimestamp { timestamp: i64, line: usize },

    #[error("non-finite value on line {line}")]
    NonFinite { line: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("model not applicable: {0}")]
    ModelInapplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible variance {variance} for mean {mean} (must lie in (0, {bound}))")]
    InfeasibleVariance { mean: f64, variance: f64, bound: f64 },

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best_params: Vec<f64>,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty chain: no samples retained after burn-in")]
    EmptyChain,
}

pub type Result<T> = std::result::Result<T, Error>;
