use crate::error::Result;
use crate::losses::{EmbeddingBatch, HyperParams, LossGrad, LossReport};
use crate::numeric::{axpy, pairwise_sq_euclidean, Matrix};
use crate::scalar::Scalar;

/// Contrastive loss over all ordered pairs.
///
/// Tightness is `(1/n) Σ_i Σ_{j: y_j = y_i} D_ij²` and the contrastive part is
/// `(1/n) Σ_i Σ_{j: y_j ≠ y_i} [m − D_ij]₊²`. The hinge subgradient at
/// `D_ij = m` is zero, and so is the gradient of a coincident negative pair.
pub fn contrastive_loss<T: Scalar>(
    b: &EmbeddingBatch<T>,
    h: &HyperParams,
) -> Result<(LossReport<T>, LossGrad<T>)> {
    h.validate()?;
    b.require_pairs()?;
    let n = b.n();
    let m = T::of(h.margin);
    let inv_n = T::one() / T::of_usize(n);
    let d2 = pairwise_sq_euclidean(&b.z)?;

    let mut tight = T::zero();
    let mut contrast = T::zero();
    let mut active = 0usize;
    let mut dz = Matrix::zeros(n, b.dim());
    let mut diff = vec![T::zero(); b.dim()];
    for i in 0..n {
        for j in (i + 1)..n {
            for ((o, &a), &c) in diff.iter_mut().zip(b.z.row(i)).zip(b.z.row(j)) {
                *o = a - c;
            }
            // each unordered pair appears twice among the ordered pairs
            let coef = if b.label(i) == b.label(j) {
                tight = tight + d2[(i, j)] + d2[(i, j)];
                T::of(4.0) * inv_n
            } else {
                let dist = d2[(i, j)].sqrt();
                let gap = m - dist;
                if gap <= T::zero() {
                    continue;
                }
                active += 1;
                contrast = contrast + gap * gap + gap * gap;
                if dist == T::zero() {
                    continue;
                }
                -T::of(4.0) * inv_n * gap / dist
            };
            axpy(coef, &diff, dz.row_mut(i));
            axpy(-coef, &diff, dz.row_mut(j));
        }
    }
    let report = LossReport::new(tight * inv_n, contrast * inv_n)
        .with_extra("margin", m)
        .with_extra("active_negative_pairs", T::of_usize(active));
    Ok((report, LossGrad::embeddings_only(dz)))
}
