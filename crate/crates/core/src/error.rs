use thiserror::Error;

/// Errors produced by the simulator and optimizer.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Time integration failed (step size underflow, tolerance not met, ...).
    #[error("integration error at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    /// A NaN or infinity showed up in an intermediate quantity.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Malformed schedule or table file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
