use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("insufficient precision: have {have} bits, need {need}")]
    InsufficientPrecision { have: u64, need: u64 },

    #[error("level {level} out of range for {n} points")]
    LevelOutOfRange { level: usize, n: usize },

    #[error("window {window} out of range for {n} points")]
    WindowOutOfRange { window: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("N = {n} too small for support radius {radius} (need N > 2*radius)")]
    NTooSmall { n: usize, radius: f64 },

    #[error("correlation order {0} out of range")]
    OrderOutOfRange(usize),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("test function {0} has no closed-form Fourier transform")]
    NoClosedFormTransform(String),

    #[error("Fourier truncation too coarse: tail bound {tail:e} exceeds tolerance {tol:e}")]
    TruncationTooCoarse { tail: f64, tol: f64 },

    #[error("enumeration budget exceeded: cost {cost:e} > budget {budget:e}")]
    BudgetExceeded { cost: f64, budget: f64 },

    #[error("boundary margin violated: {0}")]
    PrecisionMargin(String),

    #[error("config schema error: {0}")]
    Schema(String),

    #[error("no record with id {0}")]
    MissingRecord(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
