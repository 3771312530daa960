use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid graph signal: {0}")]
    InvalidSignal(String),

    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),

    #[error("interval [{t0}, {t1}] is outside the signal domain")]
    OutsideDomain { t0: f64, t1: f64 },

    #[error("horizon {horizon} is shorter than the window length {window}")]
    HorizonTooShort { horizon: f64, window: f64 },

    #[error("exhaustive cut enumeration is limited to {max} nodes, got {n}; use the type-symmetry check")]
    TooManyNodes { n: usize, max: usize },

    #[error("invalid convex set: {0}")]
    InvalidSet(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{solver} stopped after {iterations} iterations with residual {residual:e}")]
    IterationBudget {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("point lies outside the set (distance {0:e})")]
    Infeasible(f64),

    #[error("step {step} exceeds the stability limit {limit}")]
    UnstableStep { step: f64, limit: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("target sets have an empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("precondition not certified: {0}")]
    Precondition(String),

    #[error("trajectory diverged")]
    Diverged,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
