//! Random instance generators, one per verifier, sized to the verifier's
//! preconditions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::info::{ConditionalModel, DiscreteJoint};
use crate::losses::{EmbeddingBatch, HyperParams, SoftmaxClassifier};
use crate::numeric::{pairwise_sq_euclidean, LabelVector, Matrix};

use super::{Instance, Verifier};

pub const FASTAP_BINS: [usize; 3] = [4, 16, 64];
pub const MAX_JOINT_SIDE: usize = 8;

pub fn generate<R: Rng>(v: Verifier, rng: &mut R) -> Instance {
    match v {
        Verifier::TightnessChain => {
            let k = rng.random_range(1..=8);
            let per_class = rng.random_range(2..=64 / k);
            let labels = shuffled((0..k * per_class).map(|i| i % k).collect(), rng);
            Instance::TightnessChain {
                batch: unit_batch(labels, k, rng.random_range(1..=16), rng),
                hyper: random_hyper(rng),
            }
        }
        Verifier::ContrastiveChain => {
            let k = rng.random_range(2..=8);
            let labels = unbalanced_labels(k, 1, 64, rng);
            Instance::ContrastiveChain {
                batch: unit_batch(labels, k, rng.random_range(1..=16), rng),
                hyper: random_hyper(rng),
            }
        }
        Verifier::CePce => {
            let d = rng.random_range(1..=4);
            let k = rng.random_range(2..=5);
            let n = rng.random_range((8 * d).max(16)..=64);
            let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
            let z = gaussian(n, d, 1.0, rng);
            let scale = rng.random_range(0.1..1.0);
            let theta = gaussian(k, d, scale, rng);
            Instance::CePce {
                batch: EmbeddingBatch::new(z, LabelVector::new(labels, k).expect("labels below k"))
                    .expect("finite"),
                classifier: SoftmaxClassifier::new(theta, None).expect("finite"),
            }
        }
        Verifier::Hinge => {
            let k = rng.random_range(2..=5);
            let labels = unbalanced_labels(k, 1, 32, rng);
            let n = labels.len();
            let d = rng.random_range(1..=8);
            let margin = rng.random_range(0.5..2.0);
            let z = gaussian(n, d, 1.0, rng);
            let d2 = pairwise_sq_euclidean(&z).expect("finite");
            let mut max_d: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] != labels[j] {
                        max_d = max_d.max(d2[(i, j)].sqrt());
                    }
                }
            }
            // pull every cross-class pair strictly inside the hinge zone
            let reach = margin * rng.random_range(0.1..0.999);
            let z = if max_d > 0.0 {
                z.scale(reach / max_d)
            } else {
                z
            };
            Instance::Hinge {
                batch: EmbeddingBatch::new(z, LabelVector::new(labels, k).expect("labels below k"))
                    .expect("finite"),
                margin,
            }
        }
        Verifier::FastapJensen => {
            let k = rng.random_range(2..=4);
            let labels = unbalanced_labels(k, 2, 30, rng);
            let d = rng.random_range(2..=8);
            let spread = rng.random_range(0.05..1.5);
            let z = clustered(&labels, k, d, spread, rng);
            Instance::FastapJensen {
                batch: EmbeddingBatch::new(z, LabelVector::new(labels, k).expect("labels below k"))
                    .expect("finite"),
                bins: FASTAP_BINS[rng.random_range(0..FASTAP_BINS.len())],
            }
        }
        Verifier::Lemma2 => {
            let joint = random_joint(rng);
            let (rows, cols) = joint.table().shape();
            let q = Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.01..1.0));
            Instance::Lemma2 {
                joint,
                model: ConditionalModel::new(row_normalized(q)).expect("rows sum to one"),
            }
        }
        Verifier::MutualInformation => Instance::MutualInformation {
            joint: random_joint(rng),
        },
    }
}

fn gaussian<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        scale * v
    })
}

fn shuffled<R: Rng>(mut labels: Vec<usize>, rng: &mut R) -> Vec<usize> {
    labels.shuffle(rng);
    labels
}

/// Every class gets at least `min_per_class` members, the rest are drawn
/// uniformly, for a total in `[k·min_per_class, max_n]`.
fn unbalanced_labels<R: Rng>(
    k: usize,
    min_per_class: usize,
    max_n: usize,
    rng: &mut R,
) -> Vec<usize> {
    let floor = (k * min_per_class).max(2);
    let n = rng.random_range(floor..=max_n.max(floor));
    let mut labels: Vec<usize> = (0..floor).map(|i| i % k).collect();
    labels.extend((floor..n).map(|_| rng.random_range(0..k)));
    shuffled(labels, rng)
}

/// Class centres plus isotropic noise of relative size `spread`.
fn clustered<R: Rng>(
    labels: &[usize],
    k: usize,
    d: usize,
    spread: f64,
    rng: &mut R,
) -> Matrix<f64> {
    let centres = gaussian(k, d, 1.0, rng);
    let noise = gaussian(labels.len(), d, spread, rng);
    Matrix::from_fn(labels.len(), d, |i, j| {
        centres[(labels[i], j)] + noise[(i, j)]
    })
}

/// Unit rows, half the time drawn around class centres so that classes
/// are tight, otherwise isotropic.
fn unit_batch<R: Rng>(labels: Vec<usize>, k: usize, d: usize, rng: &mut R) -> EmbeddingBatch<f64> {
    let z = if rng.random_bool(0.5) {
        let spread = rng.random_range(0.01..1.0);
        clustered(&labels, k, d, spread, rng)
    } else {
        gaussian(labels.len(), d, 1.0, rng)
    };
    let z = z.normalized_rows().expect("Gaussian rows are non-zero");
    EmbeddingBatch::new(z, LabelVector::new(labels, k).expect("labels below k")).expect("finite")
}

fn random_hyper<R: Rng>(rng: &mut R) -> HyperParams {
    HyperParams {
        snca_sigma: rng.random_range(0.05..1.0),
        ms_alpha: rng.random_range(0.5..4.0),
        ms_beta: rng.random_range(1.0..50.0),
        ..HyperParams::default()
    }
}

fn row_normalized(mut q: Matrix<f64>) -> Matrix<f64> {
    for r in 0..q.rows() {
        let row = q.row_mut(r);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    q
}

/// A joint table up to 8×8 with some exact zeros and occasionally a
/// sharply peaked shape.
fn random_joint<R: Rng>(rng: &mut R) -> DiscreteJoint {
    let rows = rng.random_range(1..=MAX_JOINT_SIDE);
    let cols = rng.random_range(1..=MAX_JOINT_SIDE);
    let zero_rate = rng.random_range(0.0..0.4);
    let power = if rng.random_bool(0.25) { 6 } else { 1 };
    let mut w = Matrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(zero_rate) {
            0.0
        } else {
            rng.random_range(0.0..1.0f64).powi(power)
        }
    });
    if !w.data().iter().any(|&v| v > 0.0) {
        w[(0, 0)] = 1.0;
    }
    DiscreteJoint::from_weights(w).expect("positive total")
}
