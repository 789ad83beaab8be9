use crate::error::{Error, Result};
use crate::numeric::Matrix;
use crate::scalar::Scalar;

pub const MAX_JACOBI_SWEEPS: usize = 100;
pub const MAX_JACOBI_DIM: usize = 256;

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-10 · max(1, ‖A‖_F)` (or a few ulps of the scalar type, whichever is
/// larger).
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!(
            "eigenvalues of a {}x{} matrix",
            n,
            a.cols()
        )));
    }
    if n > MAX_JACOBI_DIM {
        return Err(Error::Precondition(format!(
            "Jacobi solver limited to d <= {MAX_JACOBI_DIM}, got {n}"
        )));
    }
    a.check_finite()?;
    let sym_tol = T::of(1e-9);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > sym_tol * T::one().max(a[(i, j)].abs()) {
                return Err(Error::Asymmetric {
                    i,
                    j,
                    gap: gap.to_f64_lossy(),
                });
            }
        }
    }

    // symmetrize so rotations see an exactly symmetric matrix
    let mut m = Matrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * T::of(0.5));
    let scale = T::one().max(m.frobenius_norm());
    let tol = T::of(1e-10).max(T::epsilon() * T::of(64.0)) * scale;

    let off_norm = |m: &Matrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                s = s + m[(i, j)] * m[(i, j)];
            }
        }
        (s + s).sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) > tol {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence(MAX_JACOBI_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, p, q);
            }
        }
    }

    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eig)
}

/// One Jacobi rotation annihilating `m[p][q]`.
fn rotate<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == T::zero() {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (apq + apq);
    // smaller root of t² + 2θt − 1 = 0
    let t = {
        let denom = theta.abs() + (theta * theta + T::one()).sqrt();
        let t = T::one() / denom;
        if theta < T::zero() {
            -t
        } else {
            t
        }
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let n = m.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        m[(k, p)] = new_kp;
        m[(p, k)] = new_kp;
        m[(k, q)] = new_kq;
        m[(q, k)] = new_kq;
    }
    m[(p, p)] = app - t * apq;
    m[(q, q)] = aqq + t * apq;
    m[(p, q)] = T::zero();
    m[(q, p)] = T::zero();
}
