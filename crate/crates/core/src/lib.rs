//! SISO linear port-Hamiltonian systems toolkit.
//!
//! Represents port-Hamiltonian systems and their controllable/observable
//! Hamiltonian normal forms, simulates their input/output behavior, learns
//! the normal-form parameters from trajectories in a structure-preserving
//! way, and decides parameter equivalence.
//!
//! Module map:
//! - [`symplectic`]: Williamson decomposition, symplectic eigenvalues, random
//!   symplectic matrices.
//! - [`systems`]: the three system families and their realization as LTI
//!   triples, plus transfer functions.
//! - [`morphisms`]: the linear system morphisms linking the families,
//!   controllability/observability tests.
//! - [`simulate`]: exact ZOH and RK4 simulation of any realization.
//! - [`learn`]: structure-preserving parameter estimation from trajectories.
//! - [`equivalence`]: parameter equivalence, canonicalization charts and
//!   groupoid arrows.
//! - [`fileio`]: JSON system files and CSV trajectories.

pub mod equivalence;
pub mod error;
pub mod fileio;
pub mod learn;
pub mod morphisms;
pub mod simulate;
pub mod symplectic;
pub mod systems;
pub mod tol;

pub use error::{PhError, PhResult};
