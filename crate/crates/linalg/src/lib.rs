//! Dense linear algebra kernels for the workflow crates.
//!
//! Everything here operates on plain row-major `f64` matrices. The crate
//! deliberately stays small: an economy SVD (one-sided Jacobi), a jittered
//! Cholesky solver, and a few subspace metrics are all the workflows need.

mod cholesky;
mod matrix;
mod subspace;
mod svd;

pub use cholesky::{cholesky_factor, cholesky_solve};
pub use matrix::Matrix;
pub use subspace::{max_principal_angle, orthogonality_error, spectral_norm};
pub use svd::{svd, truncate, SvdFactors};

/// Errors surfaced by the kernels in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Matrix construction or an operation received inconsistent dimensions.
    DimensionMismatch(String),
    /// Jacobi sweeps did not reach the convergence threshold.
    NoConvergence { sweeps: usize },
    /// A Cholesky pivot stayed non-positive through all jitter escalations.
    NotSpd,
    /// Requested truncation rank outside `1..=k`.
    RankOutOfRange { rank: usize, max: usize },
}

impl std::fmt::Display for LinalgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinalgError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            LinalgError::NoConvergence { sweeps } => {
                write!(f, "no convergence after {sweeps} Jacobi sweeps")
            }
            LinalgError::NotSpd => write!(f, "matrix not positive definite after jitter"),
            LinalgError::RankOutOfRange { rank, max } => {
                write!(f, "rank {rank} out of range 1..={max}")
            }
        }
    }
}

impl std::error::Error for LinalgError {}
