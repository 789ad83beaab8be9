//! Verifiers that turn the inequalities and identities relating the losses
//! into checks on concrete instances.
//!
//! Each verifier evaluates the explicit intermediate expressions of the
//! derivation (not "equal up to a constant" statements) and returns one
//! [`BoundCheck`](crate::check::BoundCheck) per step. Preconditions are
//! checked, never repaired: a verifier that needs unit rows rejects a batch
//! that does not have them.

mod ce_pce;
mod chains;
mod fastap;
mod hinge;
mod lambda;

pub use ce_pce::{verify_ce_pce_bound, CePceCheck, LAMBDA_MIN};
pub use chains::{
    center_identity, require_balanced, require_unit_rows, verify_contrastive_chain,
    verify_tightness_chain,
};
pub use fastap::verify_fastap_jensen;
pub use hinge::verify_hinge_approximation;
pub use lambda::{compute_pce_lambda, pce_curvature_matrices, PceLambda};

use crate::losses::EmbeddingBatch;

/// Tolerance for algebraic identities and the chains built on them.
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Tolerance for checks that go through the eigensolver.
pub const EIGEN_TOL: f64 = 1e-8;
/// Tolerance for pure log/exp inequalities.
pub const LOG_TOL: f64 = 1e-10;

pub(crate) fn describe(b: &EmbeddingBatch<f64>) -> String {
    format!("n={} d={} K={}", b.n(), b.dim(), b.num_classes())
}
