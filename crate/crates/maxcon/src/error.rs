//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by matrix assembly, solvers, and configuration handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix of dimension {dim} exceeds the dense solver cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dense eigendecomposition failed to converge")]
    DenseEigFailed,

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge in {iterations} iterations (last estimate {estimate:.6e})")]
    EigNoConvergence { iterations: usize, estimate: f64 },

    #[error("no positive spectrum: the deflated subspace is empty")]
    NoPositiveSpectrum,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid material field: {0}")]
    InvalidMaterial(String),

    #[error("grid spacing must be uniform and equal on all axes for this check (got {0:?})")]
    NonUniformSpacing([f64; 3]),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
