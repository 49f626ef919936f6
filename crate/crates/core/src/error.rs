use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("body is unbounded: {0}")]
    Unbounded(String),

    #[error("point is not strictly interior (boundary distance {distance:.3e})")]
    NotInterior { distance: f64 },

    #[error("direction must be nonzero")]
    ZeroDirection,

    #[error("backend {backend} cannot be used here: {reason}")]
    BackendMismatch { backend: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate variance {0:.3e}")]
    DegenerateVariance(f64),

    #[error("matrix is near singular (condition number {0:.3e})")]
    NearSingular(f64),

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Configuration errors are caused by the inputs; everything else is a
    /// numerical failure during the computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidBody(_)
                | Error::Unbounded(_)
                | Error::BackendMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::ZeroDirection
        )
    }
}
