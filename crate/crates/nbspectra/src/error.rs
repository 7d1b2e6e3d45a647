use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid weight law: {0}")]
    InvalidLaw(String),
    #[error("no informative eigenvalue (r0 = 0)")]
    NoInformativeEigenvalue,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("problem size exceeded: {0}")]
    SizeExceeded(String),
    #[error("eigensolver backend failure: {0}")]
    Backend(String),
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("evaluation point too close to a pole: min |lambda^2 - W^2| = {0:.3e}")]
    PoleProximity(f64),
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("weighted input rejected: {0}")]
    WeightedInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("probability overflow: {0}")]
    ProbabilityOverflow(String),
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("inconsistent phase data: {0}")]
    InconsistentPhase(String),
    #[error("too few outliers: need {need}, found {found}")]
    TooFewOutliers { need: usize, found: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
