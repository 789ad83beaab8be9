use crate::error::Result;
use crate::losses::{EmbeddingBatch, LossGrad, LossReport};
use crate::numeric::{class_means, sq_dist, Matrix};
use crate::scalar::Scalar;

/// Tightness part of the center loss, `½ Σ_i ‖z_i − c_{y_i}‖²`.
///
/// The centroids are functions of `Z`, but their contribution to the
/// gradient cancels because deviations from a mean sum to zero, leaving
/// `∂/∂z_i = z_i − c_{y_i}`. The contrastive part is reported as zero.
/// `extras["class_<k>"]` holds each class's `Σ ‖z − c_k‖²`.
pub fn center_tightness<T: Scalar>(b: &EmbeddingBatch<T>) -> Result<(LossReport<T>, LossGrad<T>)> {
    let means = class_means(&b.z, &b.y)?;
    let mut per_class = vec![T::zero(); b.num_classes()];
    let mut dz = Matrix::zeros(b.n(), b.dim());
    for i in 0..b.n() {
        let k = b.label(i);
        let c = means.row(k);
        per_class[k] = per_class[k] + sq_dist(b.z.row(i), c);
        for ((g, &zi), &ck) in dz.row_mut(i).iter_mut().zip(b.z.row(i)).zip(c) {
            *g = zi - ck;
        }
    }
    let tight = per_class.iter().copied().sum::<T>() * T::of(0.5);
    let mut report = LossReport::new(tight, T::zero());
    for (k, s) in per_class.into_iter().enumerate() {
        report = report.with_extra(format!("class_{k}"), s);
    }
    Ok((report, LossGrad::embeddings_only(dz)))
}
