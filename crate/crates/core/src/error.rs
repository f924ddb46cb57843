use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoaError {
    #[error("invalid array geometry: {0}")]
    Geometry(String),
    #[error("angle {0}° outside [-90°, 90°]")]
    AngleOutOfRange(f64),
    #[error("slot must contain at least one snapshot")]
    EmptySlot,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("polynomial is identically zero")]
    DegeneratePolynomial,
    #[error("eigen-solver failed to converge")]
    NoConvergence,
    #[error("fast eliminator needs K divisible by M (K = {k}, M = {m})")]
    FastNotApplicable { k: usize, m: usize },
    #[error("too many candidates: {got} > {max}")]
    TooManyCandidates { got: usize, max: usize },
    #[error("invalid experiment: {0}")]
    Experiment(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DoaError>;
