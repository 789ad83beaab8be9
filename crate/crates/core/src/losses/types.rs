use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{softmax_rows, LabelVector, Matrix};
use crate::scalar::Scalar;

/// `n` embeddings (rows of `z`) with their class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawBatch<T>",
    bound(
        serialize = "T: Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct EmbeddingBatch<T> {
    pub z: Matrix<T>,
    pub y: LabelVector,
}

#[derive(Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
struct RawBatch<T> {
    z: Matrix<T>,
    y: LabelVector,
}

impl<T: Scalar> TryFrom<RawBatch<T>> for EmbeddingBatch<T> {
    type Error = Error;

    fn try_from(raw: RawBatch<T>) -> Result<Self> {
        Self::new(raw.z, raw.y)
    }
}

impl<T: Scalar> EmbeddingBatch<T> {
    pub fn new(z: Matrix<T>, y: LabelVector) -> Result<Self> {
        if z.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} embeddings but {} labels",
                z.rows(),
                y.len()
            )));
        }
        z.check_finite()?;
        Ok(Self { z, y })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.z.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.z.cols()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.y.num_classes()
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.y.get(i)
    }

    pub(crate) fn require_pairs(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::Precondition(format!(
                "pairwise loss needs n >= 2, got {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// Rows (and labels) reordered by `idx`.
    pub fn permuted(&self, idx: &[usize]) -> Self {
        Self {
            z: self.z.select_rows(idx),
            y: self.y.select(idx),
        }
    }

    pub fn with_z(&self, z: Matrix<T>) -> Self {
        Self {
            z,
            y: self.y.clone(),
        }
    }
}

/// Linear soft-classifier `p_i = softmax(θ z_i + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawClassifier<T>",
    bound(
        serialize = "T: Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct SoftmaxClassifier<T> {
    /// K×d weights; row `k` is `θ_k`.
    pub theta: Matrix<T>,
    pub bias: Option<Vec<T>>,
}

#[derive(Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
struct RawClassifier<T> {
    theta: Matrix<T>,
    #[serde(default)]
    bias: Option<Vec<T>>,
}

impl<T: Scalar> TryFrom<RawClassifier<T>> for SoftmaxClassifier<T> {
    type Error = Error;

    fn try_from(raw: RawClassifier<T>) -> Result<Self> {
        Self::new(raw.theta, raw.bias)
    }
}

impl<T: Scalar> SoftmaxClassifier<T> {
    pub fn new(theta: Matrix<T>, bias: Option<Vec<T>>) -> Result<Self> {
        theta.check_finite()?;
        if let Some(b) = &bias {
            if b.len() != theta.rows() {
                return Err(Error::Shape(format!(
                    "bias has {} entries for {} classes",
                    b.len(),
                    theta.rows()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite bias".into()));
            }
        }
        Ok(Self { theta, bias })
    }

    pub fn zeros(num_classes: usize, dim: usize, with_bias: bool) -> Self {
        Self {
            theta: Matrix::zeros(num_classes, dim),
            bias: with_bias.then(|| vec![T::zero(); num_classes]),
        }
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.theta.rows()
    }

    pub(crate) fn check_compatible(&self, b: &EmbeddingBatch<T>) -> Result<()> {
        if self.num_classes() != b.num_classes() {
            return Err(Error::Shape(format!(
                "classifier has {} classes, batch has {}",
                self.num_classes(),
                b.num_classes()
            )));
        }
        if self.theta.cols() != b.dim() {
            return Err(Error::Shape(format!(
                "classifier expects d = {}, batch has d = {}",
                self.theta.cols(),
                b.dim()
            )));
        }
        Ok(())
    }

    /// n×K logits `θ_k·z_i + b_k`.
    pub fn logits(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        let mut l = z.matmul_t(&self.theta)?;
        if let Some(b) = &self.bias {
            for i in 0..l.rows() {
                for (v, &bk) in l.row_mut(i).iter_mut().zip(b) {
                    *v = *v + bk;
                }
            }
        }
        Ok(l)
    }

    /// n×K softmax probabilities.
    pub fn probabilities(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(softmax_rows(&self.logits(z)?))
    }

    /// Rows reordered by a class bijection `perm[old] = new`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let k = self.num_classes();
        let mut inv = vec![0; k];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        Self {
            theta: self.theta.select_rows(&inv),
            bias: self
                .bias
                .as_ref()
                .map(|b| inv.iter().map(|&old| b[old]).collect()),
        }
    }
}

/// A loss value broken into its tightness and contrastive parts.
///
/// `total` is always `tightness + contrastive`; `extras` carries per-loss
/// side quantities (lambda, per-class sums, FastAP, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct LossReport<T> {
    pub tightness: T,
    pub contrastive: T,
    pub total: T,
    pub extras: BTreeMap<String, T>,
}

impl<T: Scalar> LossReport<T> {
    pub fn new(tightness: T, contrastive: T) -> Self {
        Self {
            tightness,
            contrastive,
            total: tightness + contrastive,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: T) -> Self {
        self.extras.insert(key.into(), value);
        self
    }

    pub fn extra(&self, key: &str) -> Option<T> {
        self.extras.get(key).copied()
    }
}

/// Analytic gradient of a loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad<T> {
    pub dz: Matrix<T>,
    pub dtheta: Option<Matrix<T>>,
    pub dbias: Option<Vec<T>>,
}

impl<T: Scalar> LossGrad<T> {
    pub fn embeddings_only(dz: Matrix<T>) -> Self {
        Self {
            dz,
            dtheta: None,
            dbias: None,
        }
    }
}

/// Loss hyperparameters. Defaults suit unit-sphere embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Contrastive-loss margin `m` on Euclidean distances.
    pub margin: f64,
    /// SNCA temperature.
    pub snca_sigma: f64,
    /// Multi-similarity positive scale.
    pub ms_alpha: f64,
    /// Multi-similarity negative scale.
    pub ms_beta: f64,
    /// Multi-similarity similarity threshold.
    pub ms_margin: f64,
    pub label_smoothing: f64,
    pub fastap_bins: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            margin: 0.5,
            snca_sigma: 0.1,
            ms_alpha: 2.0,
            ms_beta: 50.0,
            ms_margin: 1.0,
            label_smoothing: 0.1,
            fastap_bins: 10,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be finite and >= 0");
        }
        if !(self.snca_sigma > 0.0 && self.snca_sigma.is_finite()) {
            return bad("snca_sigma must be > 0");
        }
        if !(self.ms_alpha > 0.0 && self.ms_alpha.is_finite()) {
            return bad("ms_alpha must be > 0");
        }
        if !(self.ms_beta > 0.0 && self.ms_beta.is_finite()) {
            return bad("ms_beta must be > 0");
        }
        if !self.ms_margin.is_finite() {
            return bad("ms_margin must be finite");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)");
        }
        if self.fastap_bins < 2 {
            return bad("fastap_bins must be >= 2");
        }
        Ok(())
    }
}
