use thiserror::Error;

/// Errors raised by the solvers, the scenario generator and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape mismatch, out-of-range count, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An iterative numerical procedure failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A matrix that must be positive definite is singular or indefinite.
    #[error("singular matrix: minimum eigenvalue {min_eigenvalue:e} (maximum {max_eigenvalue:e})")]
    Singular { min_eigenvalue: f64, max_eigenvalue: f64 },

    /// Invalid scenario, algorithm or sweep configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed serialized data (problem fixtures, record files).
    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
