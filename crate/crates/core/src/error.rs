use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("degenerate scenario: no free cells after rasterization")]
    DegenerateScenario,
    #[error("unsolvable scenario: no goal cells")]
    UnsolvableScenario,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("state not in free space")]
    NotFree,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("solver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("divergence: non-finite value during relaxation")]
    Divergence,
    #[error("noise assumption violated: {0}")]
    NoiseAssumptionViolated(String),
    #[error("unsupported covariance: {0}")]
    UnsupportedCovariance(String),
    #[error("dt too coarse for grid (dt = {dt}, limit = {limit})")]
    DtTooCoarse { dt: f64, limit: f64 },
    #[error("nonconvergent walkers: {timed_out} of {total} walkers did not exit")]
    NonconvergentWalkers { timed_out: usize, total: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
