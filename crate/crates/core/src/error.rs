//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or invalid configuration (dimension mismatches, bad
    /// segment tables, non-SPD covariances, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The target position coincides with the observer, so the bearing is
    /// undefined.
    #[error("singular geometry: target coincides with observer at t = {t}")]
    SingularGeometry { t: f64 },

    /// A required information matrix is numerically singular.
    #[error("observability error: cond(I_R) = {cond:.3e} exceeds {limit:.1e}")]
    Observability { cond: f64, limit: f64 },

    /// Invalid argument to a numerical routine.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
