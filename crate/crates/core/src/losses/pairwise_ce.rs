use crate::error::{Error, Result};
use crate::losses::{EmbeddingBatch, LossGrad, LossReport};
use crate::numeric::{axpy, dot, lse_unchecked, soft_means, Matrix};
use crate::scalar::Scalar;

pub const LAMBDA_FLOOR: f64 = 1e-8;

/// `Σ_i Σ_{j: y_j = y_i} z_iᵀz_j`, self pairs included.
pub(crate) fn same_class_gram_sum<T: Scalar>(b: &EmbeddingBatch<T>) -> T {
    class_sums(b).row_iter().map(|s| dot(s, s)).sum()
}

/// Row `k` is `Σ_{j: y_j = k} z_j`.
pub(crate) fn class_sums<T: Scalar>(b: &EmbeddingBatch<T>) -> Matrix<T> {
    let mut sums = Matrix::zeros(b.num_classes(), b.dim());
    for i in 0..b.n() {
        axpy(T::one(), b.z.row(i), sums.row_mut(b.label(i)));
    }
    sums
}

/// Pairwise cross-entropy for fixed soft assignments `p` and weight `λ`.
///
/// Tightness: `−1/(2λn²) Σ_i Σ_{j: y_j=y_i} z_iᵀz_j`.
/// Contrastive: `(1/n) Σ_i log Σ_k exp(z_iᵀc_k^s / λ) − 1/(2λ) Σ_k ‖c_k^s‖²`
/// with soft means `c_k^s = (1/n) Σ_j p_jk z_j`, so the exponent equals
/// `(1/(λn)) Σ_j p_jk z_iᵀz_j`. No gradient is provided.
pub fn pce_loss<T: Scalar>(
    b: &EmbeddingBatch<T>,
    p: &Matrix<T>,
    lambda: T,
) -> Result<LossReport<T>> {
    if !(lambda > T::of(LAMBDA_FLOOR)) {
        return Err(Error::LambdaDegenerate(lambda.to_f64_lossy()));
    }
    if p.cols() != b.num_classes() {
        return Err(Error::Shape(format!(
            "assignment matrix has {} columns for {} classes",
            p.cols(),
            b.num_classes()
        )));
    }
    let n = T::of_usize(b.n());
    let cs = soft_means(&b.z, p)?;
    let tight = -same_class_gram_sum(b) / (T::of(2.0) * lambda * n * n);

    let mut lse_sum = T::zero();
    let mut exps = vec![T::zero(); cs.rows()];
    for zi in b.z.row_iter() {
        for (e, ck) in exps.iter_mut().zip(cs.row_iter()) {
            *e = dot(zi, ck) / lambda;
        }
        lse_sum = lse_sum + lse_unchecked(&exps);
    }
    let soft_sq: T = cs.data().iter().map(|&v| v * v).sum();
    let contrast = lse_sum / n - soft_sq / (T::of(2.0) * lambda);
    Ok(LossReport::new(tight, contrast)
        .with_extra("lambda", lambda)
        .with_extra("soft_mean_sq_norm", soft_sq))
}

/// Simplified pairwise cross-entropy (hard class sums in both halves).
///
/// Tightness: `−(1/n²) Σ_i Σ_{j: y_j=y_i} z_iᵀz_j`.
/// Contrastive: `(1/n) Σ_i log Σ_k exp((1/n) Σ_{j: y_j=k} z_iᵀz_j)`.
pub fn spce_loss<T: Scalar>(b: &EmbeddingBatch<T>) -> Result<(LossReport<T>, LossGrad<T>)> {
    if b.n() == 0 || b.num_classes() == 0 {
        return Err(Error::Precondition("SPCE needs n >= 1 and K >= 1".into()));
    }
    let n = b.n();
    let k = b.num_classes();
    let nn = T::of_usize(n);
    let inv_n = T::one() / nn;
    let inv_n2 = inv_n * inv_n;
    let sums = class_sums(b);
    let tight = -sums.row_iter().map(|s| dot(s, s)).sum::<T>() * inv_n2;

    // q[i][k] = softmax_k((1/n) z_i·S_k)
    let mut q = Matrix::zeros(n, k);
    let mut lse_sum = T::zero();
    for i in 0..n {
        let zi = b.z.row(i);
        let row = q.row_mut(i);
        for (kk, s) in sums.row_iter().enumerate() {
            row[kk] = dot(zi, s) * inv_n;
        }
        let lse = lse_unchecked(row);
        lse_sum = lse_sum + lse;
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    let contrast = lse_sum * inv_n;

    // weighted[k] = Σ_i q_ik z_i
    let mut weighted = Matrix::zeros(k, b.dim());
    for i in 0..n {
        for kk in 0..k {
            axpy(q[(i, kk)], b.z.row(i), weighted.row_mut(kk));
        }
    }
    let mut dz = Matrix::zeros(n, b.dim());
    for a in 0..n {
        let ya = b.label(a);
        let out = dz.row_mut(a);
        for kk in 0..k {
            axpy(q[(a, kk)] * inv_n2, sums.row(kk), out);
        }
        axpy(inv_n2, weighted.row(ya), out);
        axpy(-T::of(2.0) * inv_n2, sums.row(ya), out);
    }
    Ok((
        LossReport::new(tight, contrast),
        LossGrad::embeddings_only(dz),
    ))
}
