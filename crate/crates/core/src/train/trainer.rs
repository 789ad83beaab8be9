use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{recall_at_k, Distance};
use crate::losses::{
    cross_entropy_loss, spce_loss, EmbeddingBatch, HyperParams, LossGrad, LossKind, LossReport,
    SoftmaxClassifier,
};
use crate::numeric::{dot, LabelVector, Matrix};
use crate::rng;

use super::data::Dataset;
use super::mlp::{Architecture, MlpParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub lr: f64,
    pub momentum: f64,
    /// L2 penalty on weights (encoder and classifier), never on biases.
    pub weight_decay: f64,
    /// Smoothing for every cross-entropy evaluated during training.
    /// `hyper.label_smoothing` is not consulted.
    pub label_smoothing: f64,
    pub seed: u64,
    /// ℓ2-normalize embeddings before the loss.
    pub normalize: bool,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub hyper: HyperParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::CrossEntropy,
            epochs: 200,
            batch_size: None,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            label_smoothing: 0.1,
            seed: 42,
            normalize: false,
            hidden: vec![64],
            embedding_dim: 8,
            hyper: HyperParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.epochs == 0 || self.embedding_dim == 0 || self.hidden.contains(&0) {
            return bad("epochs and layer sizes must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!(
                "label smoothing must lie in [0, 1), got {}",
                self.label_smoothing
            ));
        }
        self.hyper.validate()
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            hidden: self.hidden.clone(),
            embedding_dim: self.embedding_dim,
        }
    }
}

/// One epoch of a [`TrainTrace`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_tight: f64,
    pub loss_contrast: f64,
    /// SPCE on the same embeddings, or for an SPCE run the cross-entropy of
    /// a linear probe trained alongside on detached embeddings.
    pub companion_loss: f64,
    /// Leave-one-out recall@1 on the held-out split.
    pub recall_at_1: f64,
}

/// Per-epoch records; row 0 is the state before any update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str =
    "epoch,loss_total,loss_tight,loss_contrast,companion_loss,recall_at_1";

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{TRACE_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.epoch,
                r.loss_total,
                r.loss_tight,
                r.loss_contrast,
                r.companion_loss,
                r.recall_at_1
            );
        }
        s
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Mean `|loss − companion|` over the first and the last quarter of the
    /// trained epochs (row 0 excluded).
    pub fn quartile_gaps(&self) -> Option<(f64, f64)> {
        let trained = self.rows.get(1..)?;
        let q = trained.len() / 4;
        if q == 0 {
            return None;
        }
        let gap = |rows: &[TraceRow]| {
            rows.iter()
                .map(|r| (r.loss_total - r.companion_loss).abs())
                .sum::<f64>()
                / rows.len() as f64
        };
        Some((gap(&trained[..q]), gap(&trained[trained.len() - q..])))
    }
}

/// Result of [`train_model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// The classifier head of a CE run, or the probe of an SPCE run.
    pub head: Option<SoftmaxClassifier<f64>>,
    pub trace: TrainTrace,
}

/// Momentum SGD on one parameter slice: `v ← μv + g + wd·p`, `p ← p − lr·v`.
pub fn sgd_step(
    p: &mut [f64],
    g: &[f64],
    v: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = momentum * *v + g + weight_decay * *p;
        *p -= lr * *v;
    }
}

pub(crate) struct HeadState {
    pub head: SoftmaxClassifier<f64>,
    vel_theta: Vec<f64>,
    vel_bias: Vec<f64>,
}

impl HeadState {
    pub fn new(k: usize, d: usize, with_bias: bool) -> Self {
        Self {
            head: SoftmaxClassifier::zeros(k, d, with_bias),
            vel_theta: vec![0.0; k * d],
            vel_bias: vec![0.0; if with_bias { k } else { 0 }],
        }
    }

    pub fn step(&mut self, g: &LossGrad<f64>, cfg: &TrainConfig) {
        if let Some(dt) = &g.dtheta {
            sgd_step(
                self.head.theta.data_mut(),
                dt.data(),
                &mut self.vel_theta,
                cfg.lr,
                cfg.momentum,
                cfg.weight_decay,
            );
        }
        if let (Some(b), Some(db)) = (self.head.bias.as_mut(), &g.dbias) {
            sgd_step(b, db, &mut self.vel_bias, cfg.lr, cfg.momentum, 0.0);
        }
    }
}

pub(crate) fn encoder_step(
    net: &mut MlpParams,
    grads: &MlpParams,
    vel: &mut MlpParams,
    cfg: &TrainConfig,
) {
    for ((l, g), v) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(vel.layers.iter_mut())
    {
        sgd_step(
            l.w.data_mut(),
            g.w.data(),
            v.w.data_mut(),
            cfg.lr,
            cfg.momentum,
            cfg.weight_decay,
        );
        sgd_step(&mut l.b, &g.b, &mut v.b, cfg.lr, cfg.momentum, 0.0);
    }
}

/// Row normalization and its backward map.
pub(crate) struct Normalized {
    pub z: Matrix<f64>,
    norms: Vec<f64>,
}

impl Normalized {
    pub fn new(u: &Matrix<f64>) -> Result<Self> {
        let z = u.normalized_rows()?;
        let norms = u.row_iter().map(|r| dot(r, r).sqrt()).collect();
        Ok(Self { z, norms })
    }

    /// `∂L/∂u = (g − (g·z) z) / ‖u‖` row by row.
    pub fn backward(&self, g: &Matrix<f64>) -> Matrix<f64> {
        let mut out = g.clone();
        for (i, &n) in self.norms.iter().enumerate() {
            let zi = self.z.row(i);
            let proj = dot(g.row(i), zi);
            for (o, &zv) in out.row_mut(i).iter_mut().zip(zi) {
                *o = (*o - proj * zv) / n;
            }
        }
        out
    }
}

/// The training loss on given embeddings (already normalized if needed).
pub(crate) fn evaluate_loss(
    cfg: &TrainConfig,
    z: Matrix<f64>,
    y: &LabelVector,
    head: Option<&SoftmaxClassifier<f64>>,
) -> Result<(LossReport<f64>, LossGrad<f64>)> {
    let b = EmbeddingBatch::new(z, y.clone())?;
    match cfg.loss {
        LossKind::CrossEntropy => cross_entropy_loss(
            &b,
            head.expect("CE runs carry a head"),
            cfg.label_smoothing,
            None,
        ),
        kind => kind.evaluate(&b, &cfg.hyper),
    }
}

fn embed_for_loss(cfg: &TrainConfig, net: &MlpParams, x: &Matrix<f64>) -> Result<Matrix<f64>> {
    let u = net.embed(x)?;
    if cfg.normalize {
        u.normalized_rows()
    } else {
        Ok(u)
    }
}

fn trace_row(
    cfg: &TrainConfig,
    epoch: usize,
    net: &MlpParams,
    head: Option<&HeadState>,
    train: &Dataset,
    test: &Dataset,
) -> Result<TraceRow> {
    let z = embed_for_loss(cfg, net, &train.x)?;
    let b = EmbeddingBatch::new(z.clone(), train.y.clone())?;
    let (report, _) = evaluate_loss(cfg, z, &train.y, head.map(|h| &h.head))?;
    let companion = match (cfg.loss, head) {
        (LossKind::Spce, Some(h)) => {
            cross_entropy_loss(&b, &h.head, cfg.label_smoothing, None)?
                .0
                .total
        }
        _ => spce_loss(&b)?.0.total,
    };
    let zt = embed_for_loss(cfg, net, &test.x)?;
    let recall = recall_at_k(
        &EmbeddingBatch::new(zt, test.y.clone())?,
        &[1],
        Distance::Euclidean,
    )?;
    Ok(TraceRow {
        epoch,
        loss_total: report.total,
        loss_tight: report.tightness,
        loss_contrast: report.contrastive,
        companion_loss: companion,
        recall_at_1: recall.get(Distance::Euclidean, 1).unwrap_or(0.0),
    })
}

fn finite_row(r: &TraceRow) -> bool {
    [
        r.loss_total,
        r.loss_tight,
        r.loss_contrast,
        r.companion_loss,
        r.recall_at_1,
    ]
    .iter()
    .all(|v| v.is_finite())
}

/// Appends a row, turning non-finite values into [`Error::Diverged`].
fn record(trace: &mut TrainTrace, epoch: usize, row: Result<TraceRow>) -> Result<()> {
    match row {
        Ok(r) if finite_row(&r) => {
            trace.rows.push(r);
            Ok(())
        }
        Ok(_) | Err(Error::NonFinite { .. }) => Err(Error::Diverged {
            epoch,
            trace: Box::new(std::mem::take(trace)),
        }),
        Err(e) => Err(e),
    }
}

/// Trains the encoder (and the CE head or SPCE probe) with momentum SGD.
///
/// Randomness: stream 0 of `cfg.seed` initializes the network, stream 1
/// shuffles mini-batches. A non-finite loss stops training with
/// [`Error::Diverged`], which carries the trace up to the last good epoch.
pub fn train_model(train: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.x.cols() != test.x.cols() {
        return Err(Error::Shape(
            "train and test inputs differ in dimension".into(),
        ));
    }
    let mut init_rng = rng::stream(cfg.seed, 0);
    let mut shuffle_rng = rng::stream(cfg.seed, 1);
    let mut net = MlpParams::init(cfg.architecture(train.x.cols()), &mut init_rng)?;
    let mut vel = net.zeros_like();
    let k = train.num_classes();
    let mut head = match cfg.loss {
        LossKind::CrossEntropy => Some(HeadState::new(k, cfg.embedding_dim, true)),
        LossKind::Spce => Some(HeadState::new(k, cfg.embedding_dim, true)),
        _ => None,
    };
    let train_head = |h: &mut HeadState, z: &Matrix<f64>, y: &LabelVector| -> Result<()> {
        let b = EmbeddingBatch::new(z.clone(), y.clone())?;
        let (_, g) = cross_entropy_loss(&b, &h.head, cfg.label_smoothing, None)?;
        h.step(&g, cfg);
        Ok(())
    };

    let mut trace = TrainTrace::default();
    record(
        &mut trace,
        0,
        trace_row(cfg, 0, &net, head.as_ref(), train, test),
    )?;

    let n = train.n();
    let bs = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        if bs < n {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(bs) {
            let (x, y) = if bs < n {
                (train.x.select_rows(chunk), train.y.select(chunk))
            } else {
                (train.x.clone(), train.y.clone())
            };
            let cache = net.forward(&x)?;
            let u = cache.embeddings();
            if u.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            let norm = if cfg.normalize {
                Some(Normalized::new(u)?)
            } else {
                None
            };
            let z = norm.as_ref().map_or_else(|| u.clone(), |nz| nz.z.clone());
            let (report, grad) = evaluate_loss(cfg, z.clone(), &y, head.as_ref().map(|h| &h.head))?;
            if !report.total.is_finite() || grad.dz.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            let dz = norm
                .as_ref()
                .map_or_else(|| grad.dz.clone(), |nz| nz.backward(&grad.dz));
            let grads = net.backward(&cache, &dz);
            match (cfg.loss, head.as_mut()) {
                (LossKind::CrossEntropy, Some(h)) => h.step(&grad, cfg),
                (LossKind::Spce, Some(h)) => train_head(h, &z, &y)?,
                _ => {}
            }
            encoder_step(&mut net, &grads, &mut vel, cfg);
        }
        record(
            &mut trace,
            epoch,
            trace_row(cfg, epoch, &net, head.as_ref(), train, test),
        )?;
    }
    Ok(TrainOutcome {
        params: net,
        head: head.map(|h| h.head),
        trace,
    })
}
