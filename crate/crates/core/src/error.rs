//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A grid function carries too much mass at the grid boundary for an
    /// FFT-based convolution to be trusted.
    #[error(
        "grid too narrow: boundary magnitude {boundary:.3e} exceeds {tol:.3e} of the peak; \
         widen the grid extent"
    )]
    Aliasing { boundary: f64, tol: f64 },

    /// A truncation window is too small for the requested tail tolerance.
    #[error("truncation window too small: {0}")]
    Truncation(String),

    #[error("fixed-offsets placement has no offset list for realized count {count}")]
    MissingOffsets { count: usize },

    #[error("particle step budget exceeded ({budget} steps); population explosion guard")]
    StepBudget { budget: u64 },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("branching systems with alpha >= 1 are not supported (high-density regime)")]
    UnsupportedRegime,

    #[error(
        "covariance matrix for kernel `{kernel}` on a grid of {n} points is indefinite \
         beyond the jitter budget (worst pivot {pivot:.3e})"
    )]
    IndefiniteCovariance { kernel: String, n: usize, pivot: f64 },

    #[error("insufficient replicas: got {got}, need at least {need}")]
    InsufficientReplicas { got: usize, need: usize },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),
}
