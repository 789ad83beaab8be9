use crate::error::Result;
use crate::losses::cosine::CosineGeometry;
use crate::losses::{EmbeddingBatch, HyperParams, LossGrad, LossReport};
use crate::numeric::{lse_unchecked, Matrix};
use crate::scalar::Scalar;

/// Multi-similarity loss on cosine similarities.
///
/// Tightness: `(1/n) Σ_i (1/α) log[1 + Σ_{j≠i, y_j=y_i} e^{−α(S_ij − m)}]`.
/// Contrastive: `(1/n) Σ_i (1/β) log[1 + Σ_{y_j≠y_i} e^{β(S_ij − m)}]`.
/// `m` is `ms_margin`. The `log(1 + Σ)` is evaluated as a log-sum-exp with
/// a zero exponent prepended, so both parts are non-negative.
pub fn multi_similarity_loss<T: Scalar>(
    b: &EmbeddingBatch<T>,
    h: &HyperParams,
) -> Result<(LossReport<T>, LossGrad<T>)> {
    h.validate()?;
    b.require_pairs()?;
    let n = b.n();
    let geo = CosineGeometry::new(&b.z)?;
    let alpha = T::of(h.ms_alpha);
    let beta = T::of(h.ms_beta);
    let margin = T::of(h.ms_margin);
    let inv_n = T::one() / T::of_usize(n);

    let mut tight = T::zero();
    let mut contrast = T::zero();
    let mut g = Matrix::zeros(n, n);
    let mut pos = Vec::with_capacity(n + 1);
    let mut neg = Vec::with_capacity(n + 1);
    for i in 0..n {
        pos.clear();
        neg.clear();
        pos.push(T::zero());
        neg.push(T::zero());
        for j in (0..n).filter(|&j| j != i) {
            let s = geo.sim[(i, j)];
            if b.label(j) == b.label(i) {
                pos.push(-alpha * (s - margin));
            } else {
                neg.push(beta * (s - margin));
            }
        }
        let lse_pos = lse_unchecked(&pos);
        let lse_neg = lse_unchecked(&neg);
        tight = tight + lse_pos / alpha;
        contrast = contrast + lse_neg / beta;
        for j in (0..n).filter(|&j| j != i) {
            let s = geo.sim[(i, j)];
            // d/dS of (1/α)·lse = −softmax weight; (1/β)·lse = +softmax weight
            g[(i, j)] = if b.label(j) == b.label(i) {
                -(-alpha * (s - margin) - lse_pos).exp() * inv_n
            } else {
                (beta * (s - margin) - lse_neg).exp() * inv_n
            };
        }
    }
    let report = LossReport::new(tight * inv_n, contrast * inv_n)
        .with_extra("alpha", alpha)
        .with_extra("beta", beta)
        .with_extra("ms_margin", margin);
    Ok((report, LossGrad::embeddings_only(geo.backward(&g))))
}
