use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while scoring, fitting or reading data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point has {got} coordinate(s), model expects {expected}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("not enough data: {what} (need at least {needed}, got {got})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "GPD fit did not converge after {starts} starts \
         (best sigma={best_sigma:.6}, xi={best_xi:.6}, loglik={best_loglik:.6})"
    )]
    GpdNonConvergence {
        starts: usize,
        best_sigma: f64,
        best_xi: f64,
        best_loglik: f64,
    },

    #[error("binomial smoother failed: {reason}; deviance trace {trace:?}")]
    SmootherFailure { reason: String, trace: Vec<f64> },

    #[error("cannot parse model spec `{spec}`: {reason}")]
    ModelSpec { spec: String, reason: String },

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::GpdNonConvergence { .. } | Error::SmootherFailure { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
