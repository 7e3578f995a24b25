use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("component index {index} out of range for {count} components")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("lambda must lie in [0, 1], received {0}")]
    InvalidLambda(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no closed form for {0}")]
    NoClosedForm(String),

    #[error("reference minimizer required: {0}")]
    MissingMinimizer(String),

    #[error("Newton iteration did not converge after {iterations} iterations (last gradient norm {grad_norm:e}); the minimizer may lie at infinity (separable data)")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("singular Hessian at Newton iteration {iteration}; consider adding a ridge term")]
    SingularHessian { iteration: usize },

    #[error("x_star is not a stationary point: gradient norm {0:e} exceeds 1e-8")]
    NotStationary(f64),

    #[error("minimum Hessian eigenvalue {0} must exceed 1/2")]
    EigenvalueTooSmall(f64),

    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),

    #[error("quadrature horizon {horizon} too small; tail bound needs at least {required}")]
    HorizonTooSmall { horizon: f64, required: f64 },

    #[error("non-finite iterate after {0} steps")]
    NonFinite(u64),

    #[error("slope undefined: {0}")]
    SlopeUndefined(String),

    #[error("run failed at iteration {iteration}: {source}")]
    Run {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{0}")]
    Config(String),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
