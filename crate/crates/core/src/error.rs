use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("table of {requested} entries exceeds the capacity limit of {limit}")]
    Capacity { requested: u128, limit: usize },

    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),

    #[error("symbol {symbol} is out of range for an alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("word of length {len} is shorter than the required {required}")]
    WordTooShort { len: usize, required: usize },

    #[error("table has {got} entries, expected {expected}")]
    TableLength { got: usize, expected: usize },

    #[error("alphabet sizes differ: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("Hölder exponent must lie in (0, 1), got {0}")]
    InvalidTheta(f64),

    #[error("table entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("table entry {index} is not strictly positive ({value})")]
    NonPositive { index: usize, value: f64 },

    #[error("fiber sum deviates from 1 by {deviation:e} (fiber {fiber})")]
    FiberSum { fiber: usize, deviation: f64 },

    #[error("not a probability vector: {0}")]
    NotProbability(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("eigendata residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("invalid first-return loop: {0}")]
    InvalidLoop(String),

    #[error("every point of the grid diverges")]
    DivergentGrid,

    #[error("shift condition violated: theta * e^p = {value} >= 1 (p = {p})")]
    ShiftCondition { theta: f64, p: f64, value: f64 },

    #[error("requested depth {requested} exceeds the available depth {available}")]
    DepthTooLarge { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),

    /// A numerical inequality the workbench verifies did not hold.
    #[error("check failed [{check}]: {detail}")]
    CheckFailed { check: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
