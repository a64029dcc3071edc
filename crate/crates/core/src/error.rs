use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("grid radius {radius} too small, need at least {required}")]
    GridTooSmall { radius: f64, required: f64 },

    #[error("no admissible step measure: {0}")]
    InfeasibleStep(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("CFL condition violated: dt = {dt:e} exceeds the maximal admissible {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no paths requested")]
    NoPaths,

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
