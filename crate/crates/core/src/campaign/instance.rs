use serde::{Deserialize, Serialize};

use crate::bounds::{
    verify_ce_pce_bound, verify_contrastive_chain, verify_fastap_jensen,
    verify_hinge_approximation, verify_tightness_chain,
};
use crate::check::BoundCheck;
use crate::error::Result;
use crate::info::{check_mutual_information, lemma2_identity, ConditionalModel, DiscreteJoint};
use crate::losses::{EmbeddingBatch, HyperParams, SoftmaxClassifier};

use super::Verifier;

/// A self-contained verifier input. This is the witness format and the
/// format accepted for replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verifier", rename_all = "snake_case", deny_unknown_fields)]
pub enum Instance {
    TightnessChain {
        batch: EmbeddingBatch<f64>,
        hyper: HyperParams,
    },
    ContrastiveChain {
        batch: EmbeddingBatch<f64>,
        hyper: HyperParams,
    },
    CePce {
        batch: EmbeddingBatch<f64>,
        classifier: SoftmaxClassifier<f64>,
    },
    Hinge {
        batch: EmbeddingBatch<f64>,
        margin: f64,
    },
    FastapJensen {
        batch: EmbeddingBatch<f64>,
        bins: usize,
    },
    Lemma2 {
        joint: DiscreteJoint,
        model: ConditionalModel,
    },
    MutualInformation {
        joint: DiscreteJoint,
    },
}

impl Instance {
    pub fn verifier(&self) -> Verifier {
        match self {
            Instance::TightnessChain { .. } => Verifier::TightnessChain,
            Instance::ContrastiveChain { .. } => Verifier::ContrastiveChain,
            Instance::CePce { .. } => Verifier::CePce,
            Instance::Hinge { .. } => Verifier::Hinge,
            Instance::FastapJensen { .. } => Verifier::FastapJensen,
            Instance::Lemma2 { .. } => Verifier::Lemma2,
            Instance::MutualInformation { .. } => Verifier::MutualInformation,
        }
    }

    /// Runs the verifier. Errors are precondition failures or degenerate
    /// instances (the campaign counts them as skips).
    pub fn check(&self) -> Result<Vec<BoundCheck>> {
        match self {
            Instance::TightnessChain { batch, hyper } => verify_tightness_chain(batch, hyper),
            Instance::ContrastiveChain { batch, hyper } => verify_contrastive_chain(batch, hyper),
            Instance::CePce { batch, classifier } => {
                let r = verify_ce_pce_bound(batch, classifier)?;
                Ok(vec![r.bound, r.f1_link, r.f2_link])
            }
            Instance::Hinge { batch, margin } => verify_hinge_approximation(batch, *margin),
            Instance::FastapJensen { batch, bins } => Ok(vec![verify_fastap_jensen(batch, *bins)?]),
            Instance::Lemma2 { joint, model } => Ok(vec![lemma2_identity(joint, model)?]),
            Instance::MutualInformation { joint } => Ok(check_mutual_information(joint)),
        }
    }
}
