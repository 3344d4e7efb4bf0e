use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("Poisson source not mean-free (mean = {mean:e}, l2 = {l2:e})")]
    PoissonNotMeanFree { mean: f64, l2: f64 },

    #[error("profile bandwidth exceeds truncation (profile band {band}, Ny = {ny})")]
    BandwidthExceedsTruncation { band: usize, ny: usize },

    #[error("sigma_min iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("semigroup norm needs Ny <= {max}, got {ny}; fit a decay rate from a trajectory instead")]
    MatrixTooLarge { ny: usize, max: usize },

    #[error("numerical overflow at t = {t_last}")]
    Overflow { t_last: f64 },

    #[error("series not strictly positive in window")]
    NonPositiveSeries,

    #[error("estimate not converged in Ny for nu = {nus:?}")]
    NotConverged { nus: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing series column `{0}`")]
    MissingSeries(String),

    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config { line: usize, key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
