use thiserror::Error;

/// Errors raised by the optimization engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A gradient was requested at a point where the function is not differentiable.
    #[error("not differentiable: {0}")]
    Boundary(String),

    /// The operation needs more data than is currently available.
    #[error("not ready: {0}")]
    NotReady(String),

    /// The requested quantity cannot be computed (e.g. no ground-truth utility).
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The black-box evaluation channel failed.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A configuration field failed validation; `field` is its dotted path.
    #[error("invalid configuration: {field}: {message}")]
    InvalidField { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
