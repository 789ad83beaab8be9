use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{cross_entropy_loss, EmbeddingBatch, HyperParams, LossKind, SoftmaxClassifier};
use crate::numeric::{pairwise_sq_euclidean, LabelVector, Matrix};
use crate::rng;

/// At most this many coordinates are perturbed per check.
pub const MAX_COORDS: usize = 200;
/// Contrastive-loss pairs with `|m − D_ij|` below this sit on the hinge kink.
pub const KINK_BAND: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-6;

/// `|a − f| / max(|a|, |f|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Worst relative error between `grad` and central differences of `f` at
/// `x` over `coords`. Returns the error and the coordinate it came from.
pub fn central_difference_error(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    grad: &[f64],
    coords: &[usize],
    step: f64,
) -> Result<(f64, Option<usize>)> {
    let mut xp = x.to_vec();
    let mut worst = (0.0, None);
    for &c in coords {
        xp[c] = x[c] + step;
        let up = f(&xp)?;
        xp[c] = x[c] - step;
        let down = f(&xp)?;
        xp[c] = x[c];
        let err = relative_error(grad[c], (up - down) / (2.0 * step));
        if !(err <= worst.0) {
            worst = (err, Some(c));
        }
    }
    Ok(worst)
}

/// Outcome of [`finite_difference_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub loss: LossKind,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because they touch a hinge kink.
    pub excluded: usize,
    /// Which coordinate produced the worst error, e.g. `z[3,1]`.
    pub worst: Option<String>,
}

/// Up to `budget` indices of `0..len`, evenly strided.
fn strided(len: usize, budget: usize) -> Vec<usize> {
    if len <= budget {
        (0..len).collect()
    } else {
        (0..budget).map(|i| i * len / budget).collect()
    }
}

/// Rows of `Z` that take part in a cross-class pair on the hinge kink.
fn kink_rows(b: &EmbeddingBatch<f64>, margin: f64) -> Result<Vec<bool>> {
    let d2 = pairwise_sq_euclidean(&b.z)?;
    let n = b.n();
    let mut out = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if b.label(i) != b.label(j) && (margin - d2[(i, j)].sqrt()).abs() < KINK_BAND {
                out[i] = true;
            }
        }
    }
    Ok(out)
}

/// Compares a loss's analytic gradient with central differences.
///
/// The perturbed vector is `Z` followed, for cross-entropy, by `θ` and the
/// bias of `head`. Classifier coordinates are always included (strided if
/// they alone exceed the budget); `Z` coordinates fill the rest of the
/// [`MAX_COORDS`] budget. For the contrastive loss, rows of `Z` involved in
/// a pair within [`KINK_BAND`] of the margin are skipped.
pub fn finite_difference_check(
    loss: LossKind,
    b: &EmbeddingBatch<f64>,
    head: Option<&SoftmaxClassifier<f64>>,
    h: &HyperParams,
    step: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::InvalidParameter(format!(
            "step must lie in [1e-7, 1e-3], got {step}"
        )));
    }
    let (n, d) = b.z.shape();
    let nz = n * d;
    let eps = h.label_smoothing;

    let (x, grad, k, with_bias) = if loss == LossKind::CrossEntropy {
        let c = head
            .ok_or_else(|| Error::Precondition("cross-entropy check needs a classifier".into()))?;
        let (_, g) = cross_entropy_loss(b, c, eps, None)?;
        let mut x = b.z.data().to_vec();
        x.extend(c.theta.data());
        let mut grad = g.dz.into_data();
        grad.extend(g.dtheta.expect("CE returns dθ").data());
        if let (Some(bias), Some(db)) = (&c.bias, &g.dbias) {
            x.extend(bias);
            grad.extend(db);
        }
        (x, grad, c.num_classes(), c.bias.is_some())
    } else {
        let (_, g) = loss.evaluate(b, h)?;
        (b.z.data().to_vec(), g.dz.into_data(), 0, false)
    };

    let mut excluded = 0;
    let z_coords: Vec<usize> = if loss == LossKind::Contrastive {
        let kinks = kink_rows(b, h.margin)?;
        (0..nz)
            .filter(|&c| {
                let skip = kinks[c / d];
                excluded += usize::from(skip);
                !skip
            })
            .collect()
    } else {
        (0..nz).collect()
    };
    let head_coords: Vec<usize> = (nz..x.len()).collect();
    let head_pick = strided(head_coords.len(), MAX_COORDS);
    let mut coords: Vec<usize> = head_pick.iter().map(|&i| head_coords[i]).collect();
    let z_pick = strided(z_coords.len(), MAX_COORDS - coords.len());
    coords.extend(z_pick.iter().map(|&i| z_coords[i]));
    coords.sort_unstable();

    let y = b.y.clone();
    let mut f = |v: &[f64]| -> Result<f64> {
        let z = Matrix::new(n, d, v[..nz].to_vec())?;
        let batch = EmbeddingBatch::new(z, y.clone())?;
        if loss == LossKind::CrossEntropy {
            let theta = Matrix::new(k, d, v[nz..nz + k * d].to_vec())?;
            let bias = with_bias.then(|| v[nz + k * d..].to_vec());
            let c = SoftmaxClassifier::new(theta, bias)?;
            Ok(cross_entropy_loss(&batch, &c, eps, None)?.0.total)
        } else {
            Ok(loss.evaluate(&batch, h)?.0.total)
        }
    };
    let (max_rel_error, worst) = central_difference_error(&mut f, &x, &grad, &coords, step)?;
    let worst = worst.map(|c| {
        if c < nz {
            format!("z[{},{}]", c / d, c % d)
        } else if c < nz + k * d {
            let t = c - nz;
            format!("theta[{},{}]", t / d, t % d)
        } else {
            format!("bias[{}]", c - nz - k * d)
        }
    });
    Ok(GradCheckReport {
        loss,
        max_rel_error,
        checked: coords.len(),
        excluded,
        worst,
    })
}

/// Settings for [`gradient_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradSuiteConfig {
    pub losses: Vec<LossKind>,
    pub batches: usize,
    pub max_n: usize,
    pub max_d: usize,
    pub max_k: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub hyper: HyperParams,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        Self {
            losses: LossKind::ALL.to_vec(),
            batches: 50,
            max_n: 32,
            max_d: 8,
            max_k: 5,
            step: 1e-5,
            tolerance: 1e-4,
            seed: 42,
            hyper: HyperParams::default(),
        }
    }
}

impl GradSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.losses.is_empty() || self.batches == 0 {
            return Err(Error::InvalidParameter(
                "need at least one loss and one batch".into(),
            ));
        }
        if self.max_k < 2 || self.max_n < 2 * self.max_k || self.max_d == 0 {
            return Err(Error::InvalidParameter(
                "need max_k >= 2, max_n >= 2·max_k and max_d >= 1".into(),
            ));
        }
        if !(1e-7..=1e-3).contains(&self.step) {
            return Err(Error::InvalidParameter(format!(
                "step must lie in [1e-7, 1e-3], got {}",
                self.step
            )));
        }
        self.hyper.validate()
    }
}

/// Worst finite-difference error of one loss over all suite batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradSuiteRow {
    pub loss: LossKind,
    pub batches: usize,
    pub max_rel_error: f64,
    pub worst_batch: usize,
    pub worst_coord: Option<String>,
    pub checked: usize,
    pub excluded: usize,
    pub passed: bool,
}

/// Batch `index` of the suite: every class has at least two members, and
/// the scale varies so that the contrastive hinge is partly active.
pub fn suite_batch(
    cfg: &GradSuiteConfig,
    index: usize,
) -> (EmbeddingBatch<f64>, SoftmaxClassifier<f64>) {
    let mut r = rng::stream(cfg.seed, rng::trial_stream(0x6772, index as u32));
    let k = r.random_range(2..=cfg.max_k);
    let n = r.random_range(2 * k..=cfg.max_n);
    let d = r.random_range(1..=cfg.max_d);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            if i < 2 * k {
                i % k
            } else {
                r.random_range(0..k)
            }
        })
        .collect();
    labels.shuffle(&mut r);
    let scale = r.random_range(0.05..1.0);
    let mut normal = |s: f64| {
        let v: f64 = StandardNormal.sample(&mut r);
        s * v
    };
    let z = Matrix::from_fn(n, d, |_, _| normal(scale));
    let theta = Matrix::from_fn(k, d, |_, _| normal(0.5));
    let bias = (0..k).map(|_| normal(0.5)).collect();
    (
        EmbeddingBatch::new(z, LabelVector::new(labels, k).expect("labels below k"))
            .expect("finite"),
        SoftmaxClassifier::new(theta, Some(bias)).expect("finite"),
    )
}

/// Runs [`finite_difference_check`] for every configured loss over
/// `cfg.batches` seeded batches.
pub fn gradient_suite(cfg: &GradSuiteConfig) -> Result<Vec<GradSuiteRow>> {
    cfg.validate()?;
    let batches: Vec<_> = (0..cfg.batches).map(|i| suite_batch(cfg, i)).collect();
    cfg.losses
        .iter()
        .map(|&loss| {
            let reports = batches
                .par_iter()
                .map(|(b, c)| finite_difference_check(loss, b, Some(c), &cfg.hyper, cfg.step))
                .collect::<Result<Vec<_>>>()?;
            let (worst_batch, worst) =
                reports
                    .iter()
                    .enumerate()
                    .fold((0, &reports[0]), |acc, (i, r)| {
                        if r.max_rel_error > acc.1.max_rel_error {
                            (i, r)
                        } else {
                            acc
                        }
                    });
            Ok(GradSuiteRow {
                loss,
                batches: reports.len(),
                max_rel_error: worst.max_rel_error,
                worst_batch,
                worst_coord: worst.worst.clone(),
                checked: reports.iter().map(|r| r.checked).sum(),
                excluded: reports.iter().map(|r| r.excluded).sum(),
                passed: worst.max_rel_error <= cfg.tolerance,
            })
        })
        .collect()
}
