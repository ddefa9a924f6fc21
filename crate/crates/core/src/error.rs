//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by the phlearn toolkit.
#[derive(Debug, Error)]
pub enum PhError {
    /// A matrix expected to be symmetric is not, within tolerance.
    #[error("matrix is not symmetric: relative asymmetry {residual:.3e} exceeds {tol:.3e}")]
    NotSymmetric { residual: f64, tol: f64 },

    /// A matrix expected to be symmetric positive-definite has a
    /// non-positive (or numerically zero) eigenvalue.
    #[error("matrix is not positive-definite: min eigenvalue {min_eig:.3e}, max {max_eig:.3e}")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    /// A matrix expected to be skew-symmetric is not, within tolerance.
    #[error("matrix is not skew-symmetric: relative residual {residual:.3e} exceeds {tol:.3e}")]
    NotSkewSymmetric { residual: f64, tol: f64 },

    /// A skew-symmetric matrix is singular (a block frequency is below tolerance).
    #[error("skew-symmetric matrix is singular: smallest block frequency {min_freq:.3e}")]
    SingularSkew { min_freq: f64 },

    /// A matrix expected to be symplectic fails S^T J S = J, within tolerance.
    #[error("matrix is not symplectic: residual {residual:.3e} exceeds {tol:.3e}")]
    NotSymplectic { residual: f64, tol: f64 },

    /// Dimensions of the operands do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// A scalar or structural argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A simulation state stopped being finite (overflow/divergence).
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    /// An internally constructed morphism failed its defining identities;
    /// indicates numerical breakdown rather than caller error.
    #[error("morphism postcondition failed: {name} residual {residual:.3e} exceeds {tol:.3e}")]
    MorphismResidual {
        name: &'static str,
        residual: f64,
        tol: f64,
    },

    /// A groupoid arrow membership condition does not hold.
    #[error("arrow condition failed: {condition} (residual {residual:.3e})")]
    ArrowCondition { condition: String, residual: f64 },

    /// Two trajectories live on different sample grids.
    #[error("trajectory grid mismatch: {0}")]
    GridMismatch(String),

    /// A dataset cannot support the requested fit.
    #[error("degenerate dataset: {0}")]
    DegenerateData(String),

    /// File-format problem: bad schema, failed invariant on load, etc.
    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type PhResult<T> = Result<T, PhError>;
