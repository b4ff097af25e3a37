use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("numerical error: {msg} ({diagnostics})")]
    Numerical { msg: String, diagnostics: String },
    #[error("no convergence after {iterations} iterations: {msg} (last estimate {last})")]
    Convergence { msg: String, iterations: usize, last: f64 },
    #[error("Neumann series diverges: operator norm estimate {estimate} >= 1")]
    Divergence { estimate: f64 },
    #[error("admissibility violation ({hypothesis}): {detail}")]
    Admissibility { hypothesis: String, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
