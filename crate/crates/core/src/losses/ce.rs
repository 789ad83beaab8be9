use crate::error::{Error, Result};
use crate::losses::{EmbeddingBatch, LossGrad, LossReport, SoftmaxClassifier};
use crate::numeric::{axpy, lse_unchecked, Matrix};
use crate::scalar::Scalar;

/// Smoothed one-hot target: `1 − ε` on the true class, `ε/(K−1)` elsewhere.
pub fn smoothed_target<T: Scalar>(label: usize, num_classes: usize, eps: T) -> Vec<T> {
    if num_classes == 1 {
        return vec![T::one()];
    }
    let off = eps / T::of_usize(num_classes - 1);
    (0..num_classes)
        .map(|k| if k == label { T::one() - eps } else { off })
        .collect()
}

/// Softmax cross-entropy with label smoothing.
///
/// `total = −(1/n) Σ_i Σ_k t_ik log p_ik`. The report splits it as
/// `f₁ + f₂` with a quadratic `λ/2 Σ_k ‖θ_k‖²` added to one half and removed
/// from the other:
///
/// * tightness `f₁ = −(1/n) Σ_i Σ_k t_ik ℓ_ik + λ/2 Σ_k ‖θ_k‖²`
/// * contrastive `f₂ = (1/n) Σ_i log Σ_k e^{ℓ_ik} − λ/2 Σ_k ‖θ_k‖²`
///
/// where `ℓ` are the logits (bias included). `lambda` defaults to zero when
/// the caller has no eigenvalue bound at hand. Gradients cover `Z`, `θ` and
/// the bias when present.
pub fn cross_entropy_loss<T: Scalar>(
    b: &EmbeddingBatch<T>,
    c: &SoftmaxClassifier<T>,
    eps: T,
    lambda: Option<T>,
) -> Result<(LossReport<T>, LossGrad<T>)> {
    c.check_compatible(b)?;
    if !(eps >= T::zero() && eps < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "label smoothing must lie in [0, 1), got {eps}"
        )));
    }
    let n = b.n();
    let k = c.num_classes();
    let lambda = lambda.unwrap_or_else(T::zero);
    let inv_n = T::one() / T::of_usize(n);
    let logits = c.logits(&b.z)?;

    let mut linear = T::zero();
    let mut lse_sum = T::zero();
    let mut ce = T::zero();
    // ∂CE/∂logit
    let mut g = Matrix::zeros(n, k);
    for i in 0..n {
        let row = logits.row(i);
        let lse = lse_unchecked(row);
        let t = smoothed_target(b.label(i), k, eps);
        lse_sum = lse_sum + lse;
        for kk in 0..k {
            let logp = row[kk] - lse;
            linear = linear + t[kk] * row[kk];
            ce = ce - t[kk] * logp;
            g[(i, kk)] = (logp.exp() - t[kk]) * inv_n;
        }
    }
    let theta_sq: T = c.theta.data().iter().map(|&v| v * v).sum();
    let reg = lambda * theta_sq * T::of(0.5);
    let f1 = -linear * inv_n + reg;
    let f2 = lse_sum * inv_n - reg;

    let mut dz = Matrix::zeros(n, b.dim());
    let mut dtheta = Matrix::zeros(k, b.dim());
    let mut dbias = c.bias.as_ref().map(|_| vec![T::zero(); k]);
    for i in 0..n {
        for kk in 0..k {
            let gik = g[(i, kk)];
            axpy(gik, c.theta.row(kk), dz.row_mut(i));
            axpy(gik, b.z.row(i), dtheta.row_mut(kk));
            if let Some(db) = dbias.as_mut() {
                db[kk] = db[kk] + gik;
            }
        }
    }

    let report = LossReport::new(f1, f2)
        .with_extra("ce", ce * inv_n)
        .with_extra("lambda", lambda)
        .with_extra("label_smoothing", eps);
    Ok((
        report,
        LossGrad {
            dz,
            dtheta: Some(dtheta),
            dbias,
        },
    ))
}
