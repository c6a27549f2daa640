use thiserror::Error;

/// Errors raised by the numerical kernels and the run orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A spectrum left the Gårding cone Γ_k.
    #[error("cone violation at grid point {point:?}: spectrum {spectrum:?} is not in Γ_{k}")]
    ConeViolation {
        point: Option<usize>,
        spectrum: Vec<f64>,
        k: usize,
    },

    #[error("numerical failure at grid point {point}: {message}")]
    Numerical { point: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Backtracking drove the time step below the configured floor.
    #[error("step size {dt:e} fell below dt_min {dt_min:e} at t = {t}: {reason}")]
    StepCollapse {
        t: f64,
        dt: f64,
        dt_min: f64,
        reason: String,
    },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
