use serde::{Deserialize, Serialize};

use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::losses::{cross_entropy_loss, pce_loss, EmbeddingBatch, SoftmaxClassifier};

use super::{compute_pce_lambda, describe, PceLambda, EIGEN_TOL};

/// Instances with `λ` at or below this are rejected as degenerate.
pub const LAMBDA_MIN: f64 = 1e-6;

/// Outcome of [`verify_ce_pce_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CePceCheck {
    /// `PCE ≤ CE`.
    pub bound: BoundCheck,
    /// `f₁(θ*) ≤ f₁(θ)`: the tightness half against its closed-form minimum.
    pub f1_link: BoundCheck,
    /// `f₂(θ*) ≤ f₂(θ)`: the contrastive half against the PCE contrastive term.
    pub f2_link: BoundCheck,
    pub lambda: PceLambda,
}

/// Checks that cross-entropy upper-bounds the pairwise cross-entropy.
///
/// `λ` comes from [`compute_pce_lambda`] at the supplied `θ`; `p` is held
/// at `softmax(Zθᵀ)`. CE uses no smoothing and ignores any bias.
/// `CE = f₁(θ) + f₂(θ)` and `PCE = f₁(θ*) + f₂(θ*)`, so each half is also
/// reported as its own link.
pub fn verify_ce_pce_bound(
    b: &EmbeddingBatch<f64>,
    c: &SoftmaxClassifier<f64>,
) -> Result<CePceCheck> {
    let c = SoftmaxClassifier::new(c.theta.clone(), None)?;
    let lambda = compute_pce_lambda(b, &c)?;
    if !(lambda.lambda > LAMBDA_MIN) {
        return Err(Error::LambdaDegenerate(lambda.lambda));
    }
    let l = lambda.lambda;
    let (ce, _) = cross_entropy_loss(b, &c, 0.0, Some(l))?;
    let p = c.probabilities(&b.z)?;
    let pce = pce_loss(b, &p, l)?;
    let witness = describe(b);
    let tol = EIGEN_TOL;
    let bound = BoundCheck::le("ce_ge_pce", pce.total, ce.total, tol)
        .with_witness(witness.clone())
        .with_detail("lambda", l)
        .with_detail("f1", ce.tightness)
        .with_detail("f2", ce.contrastive)
        .with_detail("pce_tightness", pce.tightness)
        .with_detail("pce_contrastive", pce.contrastive);
    let f1_link = BoundCheck::le("f1_minimum", pce.tightness, ce.tightness, tol)
        .with_witness(witness.clone())
        .with_detail("lambda", l);
    let f2_link = BoundCheck::le("f2_minimum", pce.contrastive, ce.contrastive, tol)
        .with_witness(witness)
        .with_detail("lambda", l);
    Ok(CePceCheck {
        bound,
        f1_link,
        f2_link,
        lambda,
    })
}
