//! Metric-learning losses, each reported as a tightness part plus a
//! contrastive part, with analytic gradients.
//!
//! | loss | tightness | contrastive | gradient |
//! |------|-----------|-------------|----------|
//! | [`contrastive_loss`] | same-class `D²` | hinged `[m − D]₊²` on negatives | `Z` |
//! | [`center_tightness`] | `½ Σ ‖z − c_y‖²` | 0 | `Z` |
//! | [`snca_loss`] | `−log Σ_pos e^{S/σ}` | `log Σ_{k≠i} e^{S/σ}` | `Z` |
//! | [`multi_similarity_loss`] | soft-plus over positives | soft-plus over negatives | `Z` |
//! | [`cross_entropy_loss`] | `f₁(θ)` | `f₂(θ)` | `Z`, `θ`, bias |
//! | [`pce_loss`] | soft-mean pairwise form | | none |
//! | [`spce_loss`] | hard-mean pairwise form | | `Z` |
//! | [`fastap_loss`] | `−E log P(D<d|R⁺)` | `E log P(D<d) − log P(R⁺)` | none |
//!
//! Losses never normalize embeddings themselves.

mod ce;
mod center;
mod contrastive;
pub(crate) mod cosine;
mod fastap;
mod ms;
mod pairwise_ce;
mod snca;
mod types;

pub use ce::{cross_entropy_loss, smoothed_target};
pub use center::center_tightness;
pub use contrastive::contrastive_loss;
pub use fastap::{distance_bin, fastap_loss, query_histograms, QueryHistogram};
pub use ms::multi_similarity_loss;
pub use pairwise_ce::{pce_loss, spce_loss, LAMBDA_FLOOR};
pub use snca::snca_loss;
pub use types::{EmbeddingBatch, HyperParams, LossGrad, LossReport, SoftmaxClassifier};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Scalar;

/// The trainable losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[serde(alias = "ce")]
    CrossEntropy,
    Spce,
    Contrastive,
    Center,
    Snca,
    #[serde(alias = "ms")]
    MultiSimilarity,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Contrastive,
        LossKind::Center,
        LossKind::Snca,
        LossKind::MultiSimilarity,
        LossKind::CrossEntropy,
        LossKind::Spce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::Spce => "spce",
            LossKind::Contrastive => "contrastive",
            LossKind::Center => "center",
            LossKind::Snca => "snca",
            LossKind::MultiSimilarity => "ms",
        }
    }

    pub fn needs_classifier(self) -> bool {
        self == LossKind::CrossEntropy
    }

    /// Evaluates a loss that depends on the embeddings alone.
    ///
    /// Panics for [`LossKind::CrossEntropy`], which also needs a classifier;
    /// use [`cross_entropy_loss`] directly.
    pub fn evaluate<T: Scalar>(
        self,
        b: &EmbeddingBatch<T>,
        h: &HyperParams,
    ) -> Result<(LossReport<T>, LossGrad<T>)> {
        match self {
            LossKind::Spce => spce_loss(b),
            LossKind::Contrastive => contrastive_loss(b, h),
            LossKind::Center => center_tightness(b),
            LossKind::Snca => snca_loss(b, h),
            LossKind::MultiSimilarity => multi_similarity_loss(b, h),
            LossKind::CrossEntropy => panic!("cross-entropy needs a classifier"),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "spce" => Ok(LossKind::Spce),
            "contrastive" => Ok(LossKind::Contrastive),
            "center" => Ok(LossKind::Center),
            "snca" => Ok(LossKind::Snca),
            "ms" | "multi-similarity" => Ok(LossKind::MultiSimilarity),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}
