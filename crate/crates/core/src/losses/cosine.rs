use crate::error::{Error, Result};
use crate::numeric::{l2_norm, unit_gram, Matrix};
use crate::scalar::Scalar;

/// Unit rows, row norms and cosine similarities of a batch, kept together so
/// losses built on `D^cos` can push gradients back to the raw embeddings.
pub(crate) struct CosineGeometry<T> {
    pub unit: Matrix<T>,
    pub norms: Vec<T>,
    pub sim: Matrix<T>,
}

impl<T: Scalar> CosineGeometry<T> {
    pub fn new(z: &Matrix<T>) -> Result<Self> {
        let norms: Vec<T> = z.row_iter().map(l2_norm).collect();
        if let Some(i) = norms.iter().position(|&r| r <= T::tiny_norm()) {
            return Err(Error::ZeroNormRow(i));
        }
        let unit = z.normalized_rows()?;
        let sim = unit_gram(&unit);
        Ok(Self { unit, norms, sim })
    }

    /// Maps `g[i][j] = ∂L/∂S_ij` (entries used independently, not assumed
    /// symmetric) to `∂L/∂Z`. Diagonal entries are constant and ignored.
    pub fn backward(&self, g: &Matrix<T>) -> Matrix<T> {
        let n = self.unit.rows();
        let d = self.unit.cols();
        let mut dz = Matrix::zeros(n, d);
        for i in 0..n {
            let ui = self.unit.row(i);
            let inv_r = T::one() / self.norms[i];
            let out = dz.row_mut(i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = g[(i, j)] + g[(j, i)];
                if w == T::zero() {
                    continue;
                }
                let s = self.sim[(i, j)];
                let uj = self.unit.row(j);
                for ((o, &a), &b) in out.iter_mut().zip(ui).zip(uj) {
                    *o = *o + w * (b - s * a) * inv_r;
                }
            }
        }
        dz
    }
}
