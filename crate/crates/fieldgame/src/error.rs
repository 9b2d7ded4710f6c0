use thiserror::Error;

/// Errors produced by the library.
///
/// `Validation` and `Input` mean the problem description itself is bad;
/// `Numerical` means a run aborted mid-flight (non-finite state, density
/// overflow, rank-deficient regression). The CLI maps the former to exit
/// code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a broken run rather than broken input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
