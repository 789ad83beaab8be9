use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::losses::{contrastive_loss, EmbeddingBatch, HyperParams};
use crate::numeric::pairwise_sq_euclidean;

use super::{describe, LOG_TOL};

/// Checks the linearization of the contrastive hinge.
///
/// With `x = D_ij/m` over ordered cross-class pairs, all required to sit in
/// the active zone `D_ij ≤ m`:
///
/// * `hinge_lower`: `1 − 2x ≤ (1 − x)²` at the pair with least slack;
/// * `hinge_upper`: `(1 − x)² ≤ 1 − x` likewise;
/// * `hinge_error_cap`: `|C − m²·(1/n) Σ (1 − 2x)| ≤ (m²/n) Σ x` where
///   `C` is the contrastive part of [`contrastive_loss`];
/// * `hinge_matches_loss`: `C = m²·(1/n) Σ (1 − x)²`.
pub fn verify_hinge_approximation(b: &EmbeddingBatch<f64>, m: f64) -> Result<Vec<BoundCheck>> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "hinge margin must be positive, got {m}"
        )));
    }
    let d2 = pairwise_sq_euclidean(&b.z)?;
    let n = b.n();
    let mut xs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if b.label(i) == b.label(j) {
                continue;
            }
            let d = d2[(i, j)].sqrt();
            if d > m {
                return Err(Error::Precondition(format!(
                    "pair ({i}, {j}) at distance {d} lies outside the hinge zone m = {m}"
                )));
            }
            xs.push(d / m);
        }
    }
    if xs.is_empty() {
        return Err(Error::Precondition("batch has no cross-class pairs".into()));
    }
    let witness = describe(b);
    let tol = LOG_TOL;
    let lower = BoundCheck::worst(
        "hinge_lower",
        xs.iter().map(|&x| {
            BoundCheck::le("", 1.0 - 2.0 * x, (1.0 - x) * (1.0 - x), tol).with_detail("x", x)
        }),
    )
    .expect("non-empty");
    let upper = BoundCheck::worst(
        "hinge_upper",
        xs.iter()
            .map(|&x| BoundCheck::le("", (1.0 - x) * (1.0 - x), 1.0 - x, tol).with_detail("x", x)),
    )
    .expect("non-empty");

    let h = HyperParams {
        margin: m,
        ..HyperParams::default()
    };
    let c = contrastive_loss(b, &h)?.0.contrastive;
    let inv_n = 1.0 / n as f64;
    let m2 = m * m;
    let linear: f64 = xs.iter().map(|&x| 1.0 - 2.0 * x).sum::<f64>() * inv_n;
    let square: f64 = xs.iter().map(|&x| (1.0 - x) * (1.0 - x)).sum::<f64>() * inv_n;
    let cap = m2 * inv_n * xs.iter().sum::<f64>();
    let cap_check = BoundCheck::le("hinge_error_cap", (c - m2 * linear).abs(), cap, tol)
        .with_detail("contrastive", c)
        .with_detail("linearized", m2 * linear)
        .with_detail("pairs", xs.len() as f64);
    let matches = BoundCheck::eq("hinge_matches_loss", c, m2 * square, tol);
    Ok([lower, upper, cap_check, matches]
        .into_iter()
        .map(|c| c.with_witness(witness.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{LabelVector, Matrix};

    fn pair(d: f64) -> EmbeddingBatch<f64> {
        EmbeddingBatch::new(
            Matrix::from_rows(&[vec![0.0], vec![d]]).unwrap(),
            LabelVector::new(vec![0, 1], 2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn endpoints() {
        let c = verify_hinge_approximation(&pair(0.0), 1.0).unwrap();
        assert_eq!((c[0].lhs, c[0].rhs), (1.0, 1.0));
        assert_eq!((c[1].lhs, c[1].rhs), (1.0, 1.0));
        let c = verify_hinge_approximation(&pair(1.0), 1.0).unwrap();
        assert_eq!((c[0].lhs, c[0].rhs), (-1.0, 0.0));
        assert_eq!((c[1].lhs, c[1].rhs), (0.0, 0.0));
        assert!(c.iter().all(|c| c.holds));
    }

    #[test]
    fn outside_zone_rejected() {
        assert!(matches!(
            verify_hinge_approximation(&pair(1.5), 1.0),
            Err(Error::Precondition(_))
        ));
    }
}
