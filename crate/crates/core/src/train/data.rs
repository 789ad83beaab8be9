use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, LabelVector, Matrix};
use crate::rng;

/// Rejection sampling of class means gives up after this many draws.
pub const MAX_MEAN_ATTEMPTS: usize = 100_000;

/// Gaussian blobs with well-separated means on a sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub input_dim: usize,
    /// Norm of every class mean.
    pub radius: f64,
    /// Within-class standard deviation per coordinate.
    pub sigma: f64,
    pub seed: u64,
    /// Share of each class that goes to the training split.
    pub train_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            per_class: 128,
            input_dim: 16,
            radius: 6.0,
            sigma: 1.0,
            seed: 42,
            train_fraction: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.num_classes == 0 || self.per_class == 0 || self.input_dim == 0 {
            return bad("class count, class size and input dimension must be positive");
        }
        if !(self.radius > 0.0) || !(self.sigma >= 0.0) {
            return bad("radius must be positive and sigma non-negative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        let n_train = self.train_per_class();
        if n_train == 0 || n_train == self.per_class {
            return bad("train_fraction leaves one split empty");
        }
        Ok(())
    }

    pub fn train_per_class(&self) -> usize {
        (self.per_class as f64 * self.train_fraction).round() as usize
    }
}

/// Inputs with labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix<f64>,
    pub y: LabelVector,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.y.num_classes()
    }
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Draws `K` means of norm `r` whose pairwise angles all exceed `2π/(4K)`.
fn separated_means(rng: &mut impl Rng, s: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    let min_cos = (2.0 * std::f64::consts::PI / (4.0 * s.num_classes as f64)).cos();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(s.num_classes);
    let mut attempts = 0;
    while means.len() < s.num_classes {
        attempts += 1;
        if attempts > MAX_MEAN_ATTEMPTS {
            return Err(Error::MeansTooCrowded(MAX_MEAN_ATTEMPTS));
        }
        let mut u = gaussian_vec(rng, s.input_dim);
        let norm = dot(&u, &u).sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        // cos ≤ cos(min angle) keeps the angle above the minimum
        if means.iter().all(|m| dot(m, &u) / s.radius <= min_cos) {
            u.iter_mut().for_each(|v| *v *= s.radius);
            means.push(u);
        }
    }
    Ok(means)
}

/// Generates the train and test splits. Each class contributes its first
/// `round(per_class · train_fraction)` samples to training.
pub fn generate_blobs(s: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    s.validate()?;
    let mut rng = rng::stream(s.seed, 0);
    let means = separated_means(&mut rng, s)?;
    let n_train = s.train_per_class();
    let d = s.input_dim;
    let (mut xtr, mut ytr, mut xte, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, mean) in means.iter().enumerate() {
        for i in 0..s.per_class {
            let noise = gaussian_vec(&mut rng, d);
            let row = mean.iter().zip(&noise).map(|(m, e)| m + s.sigma * e);
            if i < n_train {
                xtr.extend(row);
                ytr.push(k);
            } else {
                xte.extend(row);
                yte.push(k);
            }
        }
    }
    let k = s.num_classes;
    Ok((
        Dataset {
            x: Matrix::new(ytr.len(), d, xtr)?,
            y: LabelVector::new(ytr, k)?,
        },
        Dataset {
            x: Matrix::new(yte.len(), d, xte)?,
            y: LabelVector::new(yte, k)?,
        },
    ))
}
