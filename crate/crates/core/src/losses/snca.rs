use crate::error::{Error, Result};
use crate::losses::cosine::CosineGeometry;
use crate::losses::{EmbeddingBatch, HyperParams, LossGrad, LossReport};
use crate::numeric::{lse_unchecked, Matrix};
use crate::scalar::Scalar;

/// Scalable neighbourhood component analysis loss on cosine similarities.
///
/// Tightness: `−(1/n) Σ_i log Σ_{j≠i, y_j=y_i} exp(S_ij/σ)`.
/// Contrastive: `(1/n) Σ_i log Σ_{k≠i} exp(S_ik/σ)`.
/// Every sample needs at least one positive other than itself.
pub fn snca_loss<T: Scalar>(
    b: &EmbeddingBatch<T>,
    h: &HyperParams,
) -> Result<(LossReport<T>, LossGrad<T>)> {
    h.validate()?;
    b.require_pairs()?;
    let n = b.n();
    for i in 0..n {
        if !(0..n).any(|j| j != i && b.label(j) == b.label(i)) {
            return Err(Error::NoPositive(i));
        }
    }
    let geo = CosineGeometry::new(&b.z)?;
    let inv_sigma = T::one() / T::of(h.snca_sigma);
    let inv_n = T::one() / T::of_usize(n);

    let mut tight = T::zero();
    let mut contrast = T::zero();
    let mut g = Matrix::zeros(n, n);
    let mut pos = Vec::with_capacity(n);
    let mut all = Vec::with_capacity(n);
    for i in 0..n {
        pos.clear();
        all.clear();
        for j in (0..n).filter(|&j| j != i) {
            let a = geo.sim[(i, j)] * inv_sigma;
            all.push(a);
            if b.label(j) == b.label(i) {
                pos.push(a);
            }
        }
        let lse_pos = lse_unchecked(&pos);
        let lse_all = lse_unchecked(&all);
        tight = tight - lse_pos;
        contrast = contrast + lse_all;
        for j in (0..n).filter(|&j| j != i) {
            let a = geo.sim[(i, j)] * inv_sigma;
            let mut w = (a - lse_all).exp();
            if b.label(j) == b.label(i) {
                w = w - (a - lse_pos).exp();
            }
            g[(i, j)] = w * inv_sigma * inv_n;
        }
    }
    let report =
        LossReport::new(tight * inv_n, contrast * inv_n).with_extra("sigma", T::of(h.snca_sigma));
    Ok((report, LossGrad::embeddings_only(geo.backward(&g))))
}
