use thiserror::Error;

/// Errors raised by the optimizer, its subproblem solvers and the
/// worst-case generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem `{name}` does not support dimension {n}: {reason}")]
    IncompatibleDimension {
        name: String,
        n: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem does not provide objective values")]
    MissingObjective,

    #[error("dense Hessian unavailable for dimension {0}; use the matrix-free path")]
    DenseHessianUnavailable(usize),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Lanczos iteration did not converge after {iterations} steps (residual {residual:e})")]
    LanczosNotConverged { iterations: usize, residual: f64 },

    #[error("breakpoints must be strictly increasing (violation at index {0})")]
    NonIncreasingBreakpoints(usize),

    #[error("point {0} lies outside the interpolation window [{1}, {2}]")]
    OutsideDomain(f64, f64, f64),

    #[error("replay configuration does not match the sequence: {0}")]
    MismatchedReplay(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed trace CSV: {0}")]
    MalformedCsv(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedCsv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
