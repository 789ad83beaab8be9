use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::{EmbeddingBatch, SoftmaxClassifier};
use crate::numeric::{symmetric_eigenvalues, Matrix};

/// Negative eigenvalues above this are round-off and clamp to zero.
const CLAMP: f64 = -1e-10;

/// The weight making the second half of the cross-entropy split convex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PceLambda {
    /// `min_{k,l} σ_l(A_k)`.
    pub lambda: f64,
    pub per_class_min_eigs: Vec<f64>,
    /// `tr(A_k)` per class.
    pub traces: Vec<f64>,
}

/// `A_k = (1/n) Σ_i (p_ik − p_ik²) z_i z_iᵀ` for every class.
pub fn pce_curvature_matrices(z: &Matrix<f64>, p: &Matrix<f64>) -> Vec<Matrix<f64>> {
    let (n, d) = z.shape();
    let inv_n = 1.0 / n as f64;
    (0..p.cols())
        .map(|k| {
            let mut a = Matrix::zeros(d, d);
            for i in 0..n {
                let w = (p[(i, k)] - p[(i, k)] * p[(i, k)]) * inv_n;
                if w == 0.0 {
                    continue;
                }
                let zi = z.row(i);
                for r in 0..d {
                    let s = w * zi[r];
                    for c in 0..d {
                        a[(r, c)] += s * zi[c];
                    }
                }
            }
            a
        })
        .collect()
}

/// `λ = min_{k,l} σ_l(A_k)` with `p = softmax(θz + b)`.
pub fn compute_pce_lambda(
    b: &EmbeddingBatch<f64>,
    c: &SoftmaxClassifier<f64>,
) -> Result<PceLambda> {
    let p = c.probabilities(&b.z)?;
    let mut per_class_min_eigs = Vec::with_capacity(c.num_classes());
    let mut traces = Vec::with_capacity(c.num_classes());
    for a in pce_curvature_matrices(&b.z, &p) {
        traces.push(a.trace());
        let eig = symmetric_eigenvalues(&a)?;
        let mut m = eig.first().copied().unwrap_or(0.0);
        if m < 0.0 && m > CLAMP {
            m = 0.0;
        }
        per_class_min_eigs.push(m);
    }
    let lambda = per_class_min_eigs
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(PceLambda {
        lambda,
        per_class_min_eigs,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LabelVector;

    #[test]
    fn rank_one_half_half() {
        let b = EmbeddingBatch::new(
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            LabelVector::new(vec![0], 2).unwrap(),
        )
        .unwrap();
        // θ = 0 gives p = (0.5, 0.5), so A_k = 0.25·diag(1, 0)
        let l = compute_pce_lambda(&b, &SoftmaxClassifier::zeros(2, 2, false)).unwrap();
        assert_eq!(l.lambda, 0.0);
        assert_eq!(l.traces, vec![0.25, 0.25]);
    }

    #[test]
    fn hard_assignments_give_zero() {
        let b = EmbeddingBatch::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            LabelVector::new(vec![0, 1], 2).unwrap(),
        )
        .unwrap();
        let theta = Matrix::from_rows(&[vec![1e4, 0.0], vec![0.0, 1e4]]).unwrap();
        let c = SoftmaxClassifier::new(theta, None).unwrap();
        let l = compute_pce_lambda(&b, &c).unwrap();
        assert_eq!(l.lambda, 0.0);
        assert!(l.traces.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn full_rank_is_positive() {
        let z = Matrix::from_fn(12, 2, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64
        });
        let b = EmbeddingBatch::new(
            z,
            LabelVector::new((0..12).map(|i| i % 3).collect(), 3).unwrap(),
        )
        .unwrap();
        let theta = Matrix::from_rows(&[vec![0.2, -0.1], vec![0.0, 0.3], vec![-0.2, 0.1]]).unwrap();
        let c = SoftmaxClassifier::new(theta, None).unwrap();
        assert!(compute_pce_lambda(&b, &c).unwrap().lambda > 0.0);
    }
}
