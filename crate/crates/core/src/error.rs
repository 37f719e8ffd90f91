use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spline degree {0} (supported: 1..={max})", max = crate::spline::MAX_DEGREE)]
    InvalidDegree(usize),
    #[error("invalid element count {0}, need at least 1")]
    InvalidElementCount(usize),
    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("point {x} lies outside the domain [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("derivative order {0} is not supported (max 2)")]
    UnsupportedDerivative(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coefficient at flat index {0}")]
    NonFiniteCoefficient(usize),
    #[error("collocation count {0} is too small, need at least 2 per dimension")]
    TooFewCollocationPoints(usize),
    #[error("sample count {0} is too small, need at least 2")]
    TooFewSamples(usize),
    #[error("grid with {0} nodes per dimension is too small, need at least 3")]
    GridTooSmall(usize),
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
    #[error("benchmark '{benchmark}' requires parameter '{param}'")]
    MissingParameter { benchmark: String, param: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Dirichlet data is inconsistent at a shared boundary coefficient (mismatch {mismatch:e})")]
    InconsistentBoundaryData { mismatch: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("damping exhausted: mu = {mu:e} exceeds the limit")]
    DampingExhausted { mu: f64 },
    #[error("parameter iteration diverged: kappa = {0}")]
    Diverged(f64),
    #[error("invalid rate input: {0}")]
    InvalidRateInput(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
