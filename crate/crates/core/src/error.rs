use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0:?} is not inside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("numeric underflow: {0}")]
    Underflow(String),

    #[error("point too close to the boundary: phi(x) = {0:e} is below the stability floor")]
    NearBoundary(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("initial measure violates the boundary margin: {0}")]
    MarginViolation(String),

    #[error("step refinement aborted after {0} levels: every particle exited")]
    RefinementAbort(usize),

    #[error("time {time} is outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("particle index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("spine is incomplete (no coalescence before the horizon)")]
    IncompleteSpine,

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing file: {0}")]
    MissingFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
