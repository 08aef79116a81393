use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Diagnostics from a characteristic-function integration that did not converge.
#[derive(Debug, Clone, PartialEq, Error)]
#[error(
    "integration did not converge: {reason} (upper limit {upper_limit:.3e}, \
     error estimate {error_estimate:.3e}, tolerance {tolerance:.3e}, {evaluations} evaluations)"
)]
pub struct NumericalError {
    pub reason: String,
    pub upper_limit: f64,
    pub error_estimate: f64,
    pub tolerance: f64,
    pub evaluations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("quote {index} has zero bid-ask spread (bid = ask = {price})")]
    ZeroSpread { index: usize, price: f64 },

    #[error("invalid reduction: {0}")]
    InvalidReduction(String),

    #[error(transparent)]
    Numerical(#[from] NumericalError),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("bootstrap failed: {0}")]
    Bootstrap(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::ZeroSpread { .. }
                | Error::InvalidReduction(_)
                | Error::UnknownParameter(_)
                | Error::Io { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
