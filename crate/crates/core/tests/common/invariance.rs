//! Invariance checks over every loss. Each returns the largest deviation
//! seen, or a description of the first field that moved past `tol`.

use mll_core::bounds::compute_pce_lambda;
use mll_core::losses::{
    center_tightness, contrastive_loss, cross_entropy_loss, fastap_loss, multi_similarity_loss,
    snca_loss, spce_loss,
};
use mll_core::numeric::Matrix;
use mll_core::rng::Rng;
use mll_core::{EmbeddingBatch, HyperParams, LossReport, SoftmaxClassifier};
use rand::Rng as _;

use super::{batch_with_dim, gaussian, matmul, orthogonal, permutation};

pub const FASTAP_BINS: usize = 10;

/// A batch where every sample has a positive and a negative partner, plus
/// a matching classifier with bias.
pub fn case(r: &mut Rng) -> (EmbeddingBatch, SoftmaxClassifier, HyperParams) {
    let b = batch_with_dim(r, 24, 2, 6, 4, 2);
    let theta = gaussian(r, b.num_classes(), b.dim(), 0.8);
    let bias = (0..b.num_classes())
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    let c = SoftmaxClassifier::new(theta, Some(bias)).unwrap();
    let h = HyperParams {
        margin: r.random_range(0.2..3.0),
        snca_sigma: r.random_range(0.05..1.0),
        ms_alpha: r.random_range(0.5..4.0),
        ms_beta: r.random_range(1.0..50.0),
        ..HyperParams::default()
    };
    (b, c, h)
}

/// Every loss on `b`, keyed by name. CE uses `c` and the smoothing in `h`.
pub fn all_losses(
    b: &EmbeddingBatch,
    c: &SoftmaxClassifier,
    h: &HyperParams,
) -> Vec<(&'static str, LossReport)> {
    vec![
        ("contrastive", contrastive_loss(b, h).unwrap().0),
        ("center", center_tightness(b).unwrap().0),
        ("snca", snca_loss(b, h).unwrap().0),
        ("ms", multi_similarity_loss(b, h).unwrap().0),
        ("spce", spce_loss(b).unwrap().0),
        ("fastap", fastap_loss(b, FASTAP_BINS).unwrap()),
        (
            "ce",
            cross_entropy_loss(b, c, h.label_smoothing, None).unwrap().0,
        ),
    ]
}

fn compare(
    what: &str,
    before: &[(&'static str, LossReport)],
    after: &[(&'static str, LossReport)],
    only: &[&str],
    tol: f64,
) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for ((name, a), (_, b)) in before.iter().zip(after) {
        if !only.contains(name) {
            continue;
        }
        for (field, x, y) in [
            ("total", a.total, b.total),
            ("tightness", a.tightness, b.tightness),
            ("contrastive", a.contrastive, b.contrastive),
        ] {
            let dev = (x - y).abs() / (1.0 + x.abs());
            worst = worst.max(dev);
            if !(dev <= tol) {
                return Err(format!("{what}: {name}.{field} {x} -> {y}"));
            }
        }
    }
    Ok(worst)
}

pub const ALL: [&str; 7] = [
    "contrastive",
    "center",
    "snca",
    "ms",
    "spce",
    "fastap",
    "ce",
];

pub fn decomposition(r: &mut Rng) -> Result<f64, String> {
    let (b, c, h) = case(r);
    let mut worst: f64 = 0.0;
    for (name, rep) in all_losses(&b, &c, &h) {
        let dev = (rep.total - (rep.tightness + rep.contrastive)).abs();
        worst = worst.max(dev);
        if !(dev <= 1e-10) {
            return Err(format!(
                "{name}: total {} vs parts {} + {}",
                rep.total, rep.tightness, rep.contrastive
            ));
        }
    }
    Ok(worst)
}

pub fn permutation_invariance(r: &mut Rng) -> Result<f64, String> {
    let (b, c, h) = case(r);
    let p = permutation(r, b.n());
    let before = all_losses(&b, &c, &h);
    let after = all_losses(&b.permuted(&p), &c, &h);
    compare("permutation", &before, &after, &ALL, 1e-10)
}

pub fn relabel_invariance(r: &mut Rng) -> Result<f64, String> {
    let (b, c, h) = case(r);
    let perm = permutation(r, b.num_classes());
    let relabeled = EmbeddingBatch::new(b.z.clone(), b.y.relabel(&perm).unwrap()).unwrap();
    let before = all_losses(&b, &c, &h);
    let after = all_losses(&relabeled, &c.relabeled(&perm), &h);
    compare("relabel", &before, &after, &ALL, 1e-10)
}

pub fn rotation_invariance(r: &mut Rng) -> Result<f64, String> {
    let (b, c, h) = case(r);
    let q = orthogonal(r, b.dim());
    let rotated = b.with_z(matmul(&b.z, &q));
    let c_rot = SoftmaxClassifier::new(matmul(&c.theta, &q), c.bias.clone()).unwrap();
    let before = all_losses(&b, &c, &h);
    let after = all_losses(&rotated, &c_rot, &h);
    compare("rotation", &before, &after, &ALL, 1e-9)
}

/// λ under sample permutation and joint rotation of `Z` and `θ`.
pub fn lambda_invariance(r: &mut Rng) -> Result<f64, String> {
    let (b, c, _) = case(r);
    let c = SoftmaxClassifier::new(c.theta.clone(), None).unwrap();
    let base = compute_pce_lambda(&b, &c).unwrap();
    let p = permutation(r, b.n());
    let permuted = compute_pce_lambda(&b.permuted(&p), &c).unwrap();
    let q = orthogonal(r, b.dim());
    let rotated = compute_pce_lambda(
        &b.with_z(matmul(&b.z, &q)),
        &SoftmaxClassifier::new(matmul(&c.theta, &q), None).unwrap(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (what, other) in [("permutation", &permuted), ("rotation", &rotated)] {
        for (x, y) in base
            .per_class_min_eigs
            .iter()
            .zip(&other.per_class_min_eigs)
        {
            let dev = (x - y).abs();
            worst = worst.max(dev);
            if !(dev <= 1e-8) {
                return Err(format!("lambda under {what}: {x} -> {y}"));
            }
        }
    }
    Ok(worst)
}

/// `Z` with each row scaled by a positive factor.
pub fn row_scaled(r: &mut Rng, z: &Matrix<f64>) -> Matrix<f64> {
    let s: Vec<f64> = (0..z.rows()).map(|_| r.random_range(0.1..10.0)).collect();
    Matrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] * s[i])
}
