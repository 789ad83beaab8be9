use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::bounds::{compute_pce_lambda, LAMBDA_MIN};
use crate::error::{Error, Result};
use crate::losses::{cross_entropy_loss, pce_loss, EmbeddingBatch, SoftmaxClassifier};
use crate::numeric::dot;
use crate::rng;

use super::data::Dataset;
use super::mlp::MlpParams;
use super::trainer::{encoder_step, TrainConfig};

/// The inner minimization over `θ` stops when one step changes CE by less
/// than this.
pub const INNER_TOL: f64 = 1e-6;
pub const INNER_MAX_ITER: usize = 20_000;

/// One outer iteration of [`alternating_bound_demo`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundDemoRow {
    pub epoch: usize,
    /// `CE(W_t, θ_t)` before the inner minimization.
    pub ce_before: f64,
    /// `CE(W_t, θ⁺)` after it.
    pub ce: f64,
    /// `PCE(W_t, θ⁺)`; `None` when `λ` is degenerate.
    pub pce: Option<f64>,
    pub lambda: f64,
    pub inner_iterations: usize,
    /// `CE(W_{t+1}, θ⁺)` after the encoder step.
    pub ce_after_step: f64,
}

impl BoundDemoRow {
    /// `CE − PCE` when defined.
    pub fn gap(&self) -> Option<f64> {
        self.pce.map(|p| self.ce - p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundDemoTrace {
    pub rows: Vec<BoundDemoRow>,
}

impl BoundDemoTrace {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("epoch,ce_before,ce,pce,lambda,gap,inner_iterations,ce_after_step\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.epoch,
                r.ce_before,
                r.ce,
                opt(r.pce),
                r.lambda,
                opt(r.gap()),
                r.inner_iterations,
                r.ce_after_step
            );
        }
        s
    }

    /// Rows with a defined PCE where `CE < PCE − tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.pce.is_some_and(|p| r.ce < p - tol))
            .map(|r| r.epoch)
            .collect()
    }

    pub fn degenerate_epochs(&self) -> usize {
        self.rows.iter().filter(|r| r.pce.is_none()).count()
    }
}

/// Gradient descent on `θ` for `CE(Z, θ)` (no smoothing, no bias) at fixed
/// embeddings, with step `1/L` where `L = (1/(2n)) Σ ‖z_i‖²` bounds the
/// curvature. Returns the classifier and the CE value after every step
/// (the first entry is the starting value).
pub fn minimize_head(
    b: &EmbeddingBatch<f64>,
    start: &SoftmaxClassifier<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(SoftmaxClassifier<f64>, Vec<f64>)> {
    let n = b.n() as f64;
    let lipschitz = b.z.row_iter().map(|r| dot(r, r)).sum::<f64>() / (2.0 * n);
    let mut c = SoftmaxClassifier::new(start.theta.clone(), None)?;
    let (r, mut g) = cross_entropy_loss(b, &c, 0.0, None)?;
    let mut history = vec![r.total];
    if lipschitz == 0.0 {
        return Ok((c, history));
    }
    let lr = 1.0 / lipschitz;
    for _ in 0..max_iter {
        let dt = g.dtheta.take().expect("CE returns dθ");
        for (t, d) in c.theta.data_mut().iter_mut().zip(dt.data()) {
            *t -= lr * d;
        }
        let (r, ng) = cross_entropy_loss(b, &c, 0.0, None)?;
        let prev = *history.last().expect("non-empty");
        history.push(r.total);
        g = ng;
        if (prev - r.total).abs() < tol {
            break;
        }
    }
    Ok((c, history))
}

/// Alternates an inner minimization of CE over the classifier (encoder
/// frozen) with one epoch of momentum SGD on the encoder (classifier
/// frozen), recording CE and PCE after each inner minimization.
///
/// Uses `cfg` for the architecture, the seed and the encoder optimizer;
/// the loss choice, normalization and label smoothing are ignored (the
/// bound concerns plain CE on raw embeddings).
pub fn alternating_bound_demo(
    train: &Dataset,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<BoundDemoTrace> {
    cfg.validate()?;
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be positive".into()));
    }
    let mut init_rng = rng::stream(cfg.seed, 0);
    let mut net = MlpParams::init(cfg.architecture(train.x.cols()), &mut init_rng)?;
    let mut vel = net.zeros_like();
    let mut head = SoftmaxClassifier::zeros(train.num_classes(), cfg.embedding_dim, false);
    let mut trace = BoundDemoTrace::default();
    for epoch in 1..=epochs {
        let b = EmbeddingBatch::new(net.embed(&train.x)?, train.y.clone())?;
        let (minimized, history) = minimize_head(&b, &head, INNER_TOL, INNER_MAX_ITER)?;
        head = minimized;
        let ce = *history.last().expect("non-empty");
        let lambda = compute_pce_lambda(&b, &head)?.lambda;
        let pce = if lambda > LAMBDA_MIN {
            Some(pce_loss(&b, &head.probabilities(&b.z)?, lambda)?.total)
        } else {
            info!("bound demo: epoch {epoch} has degenerate lambda {lambda:e}, PCE skipped");
            None
        };

        let cache = net.forward(&train.x)?;
        let (_, g) = cross_entropy_loss(&b, &head, 0.0, None)?;
        let grads = net.backward(&cache, &g.dz);
        encoder_step(&mut net, &grads, &mut vel, cfg);
        let after = EmbeddingBatch::new(net.embed(&train.x)?, train.y.clone())?;
        let ce_after_step = cross_entropy_loss(&after, &head, 0.0, None)?.0.total;

        trace.rows.push(BoundDemoRow {
            epoch,
            ce_before: history[0],
            ce,
            pce,
            lambda,
            inner_iterations: history.len() - 1,
            ce_after_step,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{LabelVector, Matrix};

    #[test]
    fn inner_descent_is_monotone() {
        let z = Matrix::from_fn(20, 3, |i, j| ((i * 7 + j * 11) % 13) as f64 / 6.0 - 1.0);
        let b = EmbeddingBatch::new(
            z,
            LabelVector::new((0..20).map(|i| i % 3).collect(), 3).unwrap(),
        )
        .unwrap();
        let (_, hist) =
            minimize_head(&b, &SoftmaxClassifier::zeros(3, 3, false), 1e-9, 500).unwrap();
        assert!((hist[0] - 3f64.ln()).abs() < 1e-15);
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(hist.last().unwrap() < &hist[0]);
    }
}
