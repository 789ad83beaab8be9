//! Dense kernels shared by the losses, verifiers and evaluators.
//!
//! Everything here is a pure function of its inputs. Distances are formed by
//! explicit subtraction (never `‖a‖² + ‖b‖² − 2a·b`) so they cannot go
//! negative, and every diagonal of a distance matrix is exactly zero.

mod eigen;
mod matrix;

pub use eigen::{symmetric_eigenvalues, MAX_JACOBI_DIM, MAX_JACOBI_SWEEPS};
pub use matrix::{axpy, dot, l2_norm, sq_dist, LabelVector, Matrix};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Squared Euclidean distance matrix, `D²[i][j] = ‖z_i − z_j‖²`.
pub fn pairwise_sq_euclidean<T: Scalar>(z: &Matrix<T>) -> Result<Matrix<T>> {
    if z.rows() == 0 {
        return Err(Error::Precondition("need at least one row".into()));
    }
    z.check_finite()?;
    let n = z.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(z.row(i), z.row(j));
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// Cosine similarity matrix `z_iᵀz_j / (‖z_i‖‖z_j‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(z: &Matrix<T>) -> Result<Matrix<T>> {
    z.check_finite()?;
    let unit = z.normalized_rows()?;
    Ok(unit_gram(&unit))
}

/// Gram matrix of already unit-norm rows, clamped, diagonal forced to one.
pub(crate) fn unit_gram<T: Scalar>(unit: &Matrix<T>) -> Matrix<T> {
    let n = unit.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = T::one();
        for j in (i + 1)..n {
            let s = dot(unit.row(i), unit.row(j)).max(-T::one()).min(T::one());
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Hard class centroids; row `k` is the mean of the rows labelled `k`.
pub fn class_means<T: Scalar>(z: &Matrix<T>, y: &LabelVector) -> Result<Matrix<T>> {
    if z.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} embeddings but {} labels",
            z.rows(),
            y.len()
        )));
    }
    let k = y.num_classes();
    let mut sums = Matrix::zeros(k, z.cols());
    let mut counts = vec![0usize; k];
    for (i, row) in z.row_iter().enumerate() {
        let c = y.get(i);
        counts[c] += 1;
        axpy(T::one(), row, sums.row_mut(c));
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(c));
        }
        let inv = T::one() / T::of_usize(count);
        sums.row_mut(c).iter_mut().for_each(|v| *v = *v * inv);
    }
    Ok(sums)
}

/// Rejects rows that are not probability vectors (tolerance 1e-9 on the sum).
pub fn check_probability_rows<T: Scalar>(p: &Matrix<T>) -> Result<()> {
    let tol = T::of(1e-9);
    for (i, row) in p.row_iter().enumerate() {
        let sum: T = row.iter().copied().sum();
        if row.iter().any(|&v| v < T::zero() || !v.is_finite()) || (sum - T::one()).abs() > tol {
            return Err(Error::NotProbability {
                row: i,
                sum: sum.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Soft means `c_k^s = (1/n) Σ_i P[i][k] z_i`, one row per class.
pub fn soft_means<T: Scalar>(z: &Matrix<T>, p: &Matrix<T>) -> Result<Matrix<T>> {
    if z.rows() != p.rows() {
        return Err(Error::Shape(format!(
            "{} embeddings but {} probability rows",
            z.rows(),
            p.rows()
        )));
    }
    check_probability_rows(p)?;
    let n = z.rows();
    let mut out = Matrix::zeros(p.cols(), z.cols());
    for i in 0..n {
        for k in 0..p.cols() {
            axpy(p[(i, k)], z.row(i), out.row_mut(k));
        }
    }
    let inv = T::one() / T::of_usize(n);
    out.data_mut().iter_mut().for_each(|v| *v = *v * inv);
    Ok(out)
}

/// `log Σ exp(v_i)` with max subtraction.
pub fn log_sum_exp<T: Scalar>(v: &[T]) -> Result<T> {
    if v.is_empty() {
        return Err(Error::Precondition("log_sum_exp of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition(
            "log_sum_exp of a non-finite vector".into(),
        ));
    }
    Ok(lse_unchecked(v))
}

/// Same as [`log_sum_exp`] for inputs already known to be non-empty and finite.
#[inline]
pub(crate) fn lse_unchecked<T: Scalar>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let lse = lse_unchecked(row);
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn three_four_five() {
        let d = pairwise_sq_euclidean(&m(&[&[0.0, 0.0], &[3.0, 4.0]])).unwrap();
        assert_eq!(d.data(), &[0.0, 25.0, 25.0, 0.0]);
    }

    #[test]
    fn single_row_distance() {
        let d = pairwise_sq_euclidean(&m(&[&[1.5, -2.0, 7.0]])).unwrap();
        assert_eq!(d.data(), &[0.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let z = Matrix::<f64>::from_fn(2, 2, |i, _| if i == 1 { f64::NAN } else { 0.0 });
        assert!(matches!(
            pairwise_sq_euclidean(&z),
            Err(Error::NonFinite { row: 1, .. })
        ));
    }

    #[test]
    fn cosine_orthogonal_and_scaled() {
        let s = cosine_similarity(&m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(0, 0)], 1.0);
        let s = cosine_similarity(&m(&[&[2.0, 0.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(s[(0, 1)], 1.0);
    }

    #[test]
    fn cosine_zero_row_named() {
        let err = cosine_similarity(&m(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroNormRow(1)));
    }

    #[test]
    fn means_hard_and_soft() {
        let z = m(&[&[1.0, 0.0], &[0.0, 1.0], &[4.0, 4.0]]);
        let y = LabelVector::new(vec![0, 0, 1], 2).unwrap();
        let c = class_means(&z, &y).unwrap();
        assert_eq!(c.row(0), &[0.5, 0.5]);
        assert_eq!(c.row(1), &[4.0, 4.0]);

        let empty = LabelVector::new(vec![0, 0, 0], 2).unwrap();
        assert!(matches!(class_means(&z, &empty), Err(Error::EmptyClass(1))));

        let single = m(&[&[3.0, -1.0]]);
        let p = m(&[&[1.0, 0.0]]);
        let cs = soft_means(&single, &p).unwrap();
        assert_eq!(cs.row(0), &[3.0, -1.0]);
        assert_eq!(cs.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn soft_means_uniform_is_global_mean_over_k() {
        let z = m(&[&[1.0, 2.0], &[3.0, -4.0], &[5.0, 0.5]]);
        let p = Matrix::from_fn(3, 4, |_, _| 0.25);
        let cs = soft_means(&z, &p).unwrap();
        for k in 0..4 {
            assert!((cs[(k, 0)] - 3.0 / 4.0).abs() < 1e-15);
            assert!((cs[(k, 1)] - (-0.5) / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn soft_means_rejects_bad_rows() {
        let z = m(&[&[1.0, 2.0]]);
        assert!(soft_means(&z, &m(&[&[0.7, 0.7]])).is_err());
        assert!(soft_means(&z, &m(&[&[1.2, -0.2]])).is_err());
    }

    #[test]
    fn lse_cases() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(log_sum_exp::<f64>(&[]).is_err());
        assert_eq!(log_sum_exp(&[3.25; 5]).unwrap(), 3.25 + 5f64.ln());
    }

    #[test]
    fn generic_over_f32() {
        let z = Matrix::<f32>::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = pairwise_sq_euclidean(&z).unwrap();
        assert_eq!(d[(0, 1)], 25.0f32);
        assert!((log_sum_exp(&[0.0f32, 0.0]).unwrap() - 2f32.ln()).abs() < 1e-6);
    }
}
