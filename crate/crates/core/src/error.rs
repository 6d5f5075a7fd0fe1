use thiserror::Error;

/// Errors raised by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge within {iterations} iterations (last value {last_value:e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        last_value: f64,
    },

    /// The estimate is the zero vector, so its direction is undefined.
    #[error("SNR is undefined for a zero estimate")]
    UndefinedSnr,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
