use thiserror::Error;

/// Failure modes shared by every module.
///
/// The CLI maps these onto exit codes: invalid arguments and unsupported
/// requests are usage errors (2), numerical failures exit with 3 and
/// resource limits with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {message} (achieved error estimate {error_estimate:e})")]
    NumericalFailure {
        message: String,
        error_estimate: f64,
    },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
