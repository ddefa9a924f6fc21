//! Central tolerance constants.
//!
//! Every numeric threshold used by the library lives here so that the
//! validation logic and the test suites agree on a single source of truth.

/// Relative symmetry / symplecticity check threshold.
///
/// Double precision leaves ~16 digits; 1e-8 allows half of them to be
/// consumed by conditioning before a matrix is rejected.
pub const STRUCTURE_REL: f64 = 1e-8;

/// Positive-definiteness: the smallest eigenvalue must exceed
/// `PD_MIN_EIG_REL * max_eigenvalue`.
pub const PD_MIN_EIG_REL: f64 = 1e-12;

/// Residual bound for the SPD square root: `||K*K - M|| <= tol * ||M||`.
pub const SPD_SQRT_REL: f64 = 1e-10;

/// Reconstruction residual for the skew-symmetric block reduction.
pub const SKEW_RECON: f64 = 1e-9;

/// Condition number of the SPD square root above which the Williamson
/// decomposition reports an ill-conditioning warning.
pub const WILLIAMSON_COND_WARN: f64 = 1e12;

/// Default numerical-rank threshold: singular values below
/// `RANK_REL * sigma_max` count as zero.
pub const RANK_REL: f64 = 1e-8;

/// Residual bound for the constructed morphism identities.
pub const MORPHISM_REL: f64 = 1e-8;

/// Pole/zero cancellation tolerance used when reducing transfer functions.
pub const REDUCE_TOL: f64 = 1e-7;

/// Relative gap below which two symplectic eigenvalues are treated as equal
/// when grouping modes.
pub const EQUAL_D_GAP: f64 = 1e-7;

/// Default decision tolerance for equivalence predicates.
pub const EQUIV_TOL: f64 = 1e-8;

/// Output agreement bound for morphism-transported trajectories.
pub const TRANSPORT_Y: f64 = 1e-6;

/// Relative Hamiltonian drift bound for undriven port-Hamiltonian flows
/// under exact discretization.
pub const ENERGY_DRIFT_REL: f64 = 1e-7;

/// Relative step for central finite differences in the fitting loop.
pub const FD_REL_STEP: f64 = 1e-6;
