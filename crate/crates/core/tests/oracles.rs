//! Losses, recall, λ and mutual information against independent
//! brute-force implementations.

mod common;

use common::*;
use mll_core::bounds::{center_identity, compute_pce_lambda};
use mll_core::eval::{query_gallery_recall, recall_at_k, Distance};
use mll_core::info::{
    lemma2_terms, mutual_information_both_views, ConditionalModel, DiscreteJoint,
};
use mll_core::losses::{
    center_tightness, contrastive_loss, cross_entropy_loss, fastap_loss, multi_similarity_loss,
    snca_loss, spce_loss,
};
use mll_core::numeric::{LabelVector, Matrix};
use mll_core::train::{generate_blobs, SyntheticSpec};
use mll_core::{EmbeddingBatch, HyperParams, SoftmaxClassifier};
use rand::Rng as _;

const CASES: usize = 100;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn fastap_with_fine_bins_tracks_exact_average_precision() {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut r = seeded(601, case);
        // in one dimension every cosine distance is 0 or 2 and exact AP is
        // tie-dependent
        let b = batch_with_dim(&mut r, 30, 2, 8, 4, 2);
        let got = fastap_loss(&b, 10_000).unwrap().extra("fastap").unwrap();
        worst = worst.max((got - exact_mean_ap(&b)).abs());
    }
    eprintln!("max |FastAP − AP| = {worst:e}");
    assert!(worst <= 1e-3, "max |FastAP − AP| = {worst:e}");
}

#[test]
fn recall_matches_full_sort() {
    let ks = [1, 2, 4, 8];
    for case in 0..CASES {
        let mut r = seeded(602, case);
        let mut b = batch(&mut r, 40, 6, 6, 1);
        if case % 4 == 0 {
            // ties: snap coordinates to a coarse grid
            let z = Matrix::from_fn(b.n(), b.dim(), |i, j| (b.z[(i, j)] * 2.0).round());
            let z = Matrix::from_fn(z.rows(), z.cols(), |i, j| {
                z[(i, j)] + if j == 0 { 0.5 } else { 0.0 }
            });
            b = b.with_z(z);
        }
        let ks: Vec<usize> = ks.iter().copied().filter(|&k| k < b.n()).collect();
        for (dist, cos) in [(Distance::Euclidean, false), (Distance::Cosine, true)] {
            let got = recall_at_k(&b, &ks, dist).unwrap();
            for &k in &ks {
                let (want, scored) = full_sort_recall(&b, k, cos);
                assert_eq!(got.queries, scored, "case {case}");
                assert_eq!(
                    got.get(dist, k).unwrap(),
                    want,
                    "case {case} {dist:?} k={k}"
                );
            }
        }
    }
}

#[test]
fn query_gallery_recall_matches_brute_force() {
    for case in 0..20 {
        let mut r = seeded(603, case);
        let q = batch(&mut r, 20, 4, 3, 1);
        let gz = gaussian(&mut r, 25, q.dim(), 1.0);
        let g = EmbeddingBatch::new(gz, labels(&mut r, 25, q.num_classes(), 1)).unwrap();
        let got = query_gallery_recall(&q, &g, &[1, 3], Distance::Euclidean).unwrap();
        for k in [1, 3] {
            let mut hits = 0;
            for i in 0..q.n() {
                let mut d: Vec<(f64, usize)> = (0..g.n())
                    .map(|j| (euclid(q.z.row(i), g.z.row(j)), j))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                if d[..k].iter().any(|&(_, j)| g.label(j) == q.label(i)) {
                    hits += 1;
                }
            }
            assert_eq!(
                got.get(Distance::Euclidean, k).unwrap(),
                hits as f64 / q.n() as f64
            );
        }
    }
}

#[test]
fn center_identity_on_raw_unbalanced_batches() {
    for case in 0..CASES {
        let mut r = seeded(604, case);
        let mut b = batch(&mut r, 48, 8, 6, 1);
        let shift = r.random_range(-20.0..20.0);
        b = b.with_z(Matrix::from_fn(b.n(), b.dim(), |i, j| {
            b.z[(i, j)] * 3.0 + shift
        }));
        let checks = center_identity(&b).unwrap();
        assert!(checks.iter().all(|c| c.holds), "case {case}");
        let want = center_sum(&b);
        assert!(close(want, pairwise_center_sum(&b), 1e-9));
        let (rep, _) = center_tightness(&b).unwrap();
        assert!(close(rep.tightness, 0.5 * want, 1e-10), "case {case}");
    }
}

#[test]
fn spce_equals_cross_entropy_at_class_sums() {
    for case in 0..CASES {
        let mut r = seeded(605, case);
        let b = batch(&mut r, 32, 6, 5, 1);
        let n = b.n() as f64;
        let mut theta = Matrix::zeros(b.num_classes(), b.dim());
        for i in 0..b.n() {
            for j in 0..b.dim() {
                theta[(b.label(i), j)] += b.z[(i, j)] / n;
            }
        }
        let c = SoftmaxClassifier::new(theta, None).unwrap();
        let ce = cross_entropy_loss(&b, &c, 0.0, None).unwrap().0.total;
        let spce = spce_loss(&b).unwrap().0.total;
        assert!(close(ce, spce, 1e-10), "case {case}: {ce} vs {spce}");
    }
}

#[test]
fn pairwise_losses_match_their_definitions() {
    for case in 0..CASES {
        let mut r = seeded(606, case);
        let b = batch(&mut r, 24, 6, 4, 2);
        let h = HyperParams {
            margin: r.random_range(0.1..3.0),
            snca_sigma: r.random_range(0.05..1.0),
            ms_alpha: r.random_range(0.5..4.0),
            ms_beta: r.random_range(1.0..50.0),
            ms_margin: r.random_range(0.0..1.0),
            ..HyperParams::default()
        };
        let n = b.n();
        let (mut ct, mut cc, mut st, mut sc, mut mt, mut mc) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let (mut pos, mut all) = (vec![], vec![]);
            let (mut mp, mut mn) = (vec![0.0], vec![0.0]);
            for j in (0..n).filter(|&j| j != i) {
                let d = euclid(b.z.row(i), b.z.row(j));
                let s = cosine(b.z.row(i), b.z.row(j));
                all.push(s / h.snca_sigma);
                if b.label(i) == b.label(j) {
                    ct += d * d;
                    pos.push(s / h.snca_sigma);
                    mp.push(-h.ms_alpha * (s - h.ms_margin));
                } else {
                    cc += (h.margin - d).max(0.0).powi(2);
                    mn.push(h.ms_beta * (s - h.ms_margin));
                }
            }
            st -= ln_sum_exp(&pos);
            sc += ln_sum_exp(&all);
            mt += ln_sum_exp(&mp) / h.ms_alpha;
            mc += ln_sum_exp(&mn) / h.ms_beta;
        }
        let nf = n as f64;
        let pairs = [
            (contrastive_loss(&b, &h).unwrap().0, ct / nf, cc / nf),
            (snca_loss(&b, &h).unwrap().0, st / nf, sc / nf),
            (multi_similarity_loss(&b, &h).unwrap().0, mt / nf, mc / nf),
        ];
        for (i, (rep, t, c)) in pairs.iter().enumerate() {
            assert!(
                close(rep.tightness, *t, 1e-10),
                "case {case} loss {i}: {} vs {t}",
                rep.tightness
            );
            assert!(
                close(rep.contrastive, *c, 1e-10),
                "case {case} loss {i}: {} vs {c}",
                rep.contrastive
            );
        }
    }
}

/// Eigenvalues of a symmetric 1×1 or 2×2 matrix in closed form.
fn small_eigs(a: &Matrix<f64>) -> Vec<f64> {
    match a.rows() {
        1 => vec![a[(0, 0)]],
        2 => {
            let (p, q, s) = (a[(0, 0)], a[(1, 1)], a[(0, 1)]);
            let m = 0.5 * (p + q);
            let r = (0.25 * (p - q).powi(2) + s * s).sqrt();
            vec![m - r, m + r]
        }
        _ => unreachable!(),
    }
}

#[test]
fn lambda_from_explicit_curvature_matrices() {
    for case in 0..CASES {
        let mut r = seeded(607, case);
        let b = batch(&mut r, 30, 2, 4, 1);
        let theta = gaussian(&mut r, b.num_classes(), b.dim(), 0.7);
        let c = SoftmaxClassifier::new(theta.clone(), None).unwrap();
        let d = b.dim();
        let mut want = f64::INFINITY;
        for k in 0..b.num_classes() {
            let mut a = Matrix::zeros(d, d);
            for i in 0..b.n() {
                let logits: Vec<f64> = (0..b.num_classes())
                    .map(|kk| dot(theta.row(kk), b.z.row(i)))
                    .collect();
                let p = (logits[k] - ln_sum_exp(&logits)).exp();
                for u in 0..d {
                    for v in 0..d {
                        a[(u, v)] += (p - p * p) * b.z[(i, u)] * b.z[(i, v)] / b.n() as f64;
                    }
                }
            }
            want = want.min(small_eigs(&a)[0]);
        }
        let got = compute_pce_lambda(&b, &c).unwrap().lambda;
        assert!(
            (got - want).abs() <= 1e-10 * (1.0 + want.abs()),
            "case {case}: {got} vs {want}"
        );
    }
}

fn random_joint(r: &mut mll_core::rng::Rng) -> DiscreteJoint {
    let rows = r.random_range(1..=8);
    let cols = r.random_range(1..=8);
    let w = Matrix::from_fn(rows, cols, |_, _| {
        if r.random_bool(0.2) {
            0.0
        } else {
            r.random_range(0.0..1.0)
        }
    });
    let mut w = w;
    w[(0, 0)] += 0.1;
    DiscreteJoint::from_weights(w).unwrap()
}

#[test]
fn mutual_information_matches_direct_sum() {
    for case in 0..CASES {
        let mut r = seeded(608, case);
        let j = random_joint(&mut r);
        let p = j.table();
        let pz: Vec<f64> = (0..p.rows()).map(|i| p.row(i).iter().sum()).collect();
        let py: Vec<f64> = (0..p.cols())
            .map(|k| (0..p.rows()).map(|i| p[(i, k)]).sum())
            .collect();
        let mut mi = 0.0;
        for i in 0..p.rows() {
            for k in 0..p.cols() {
                if p[(i, k)] > 0.0 {
                    mi += p[(i, k)] * (p[(i, k)] / (pz[i] * py[k])).ln();
                }
            }
        }
        let views = mutual_information_both_views(&j);
        assert!((views.discriminative - mi).abs() <= 1e-12, "case {case}");
        assert!((views.generative - mi).abs() <= 1e-12, "case {case}");
    }
}

#[test]
fn lemma2_terms_match_direct_sums() {
    for case in 0..CASES {
        let mut r = seeded(609, case);
        let j = random_joint(&mut r);
        let (rows, cols) = j.table().shape();
        let mut q = Matrix::from_fn(rows, cols, |_, _| r.random_range(0.05..1.0));
        for i in 0..rows {
            let s: f64 = q.row(i).iter().sum();
            q.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let p = j.table();
        let (mut ce, mut h) = (0.0, 0.0);
        for i in 0..rows {
            let pz: f64 = p.row(i).iter().sum();
            for k in 0..cols {
                if p[(i, k)] > 0.0 {
                    ce -= p[(i, k)] * q[(i, k)].ln();
                    h -= p[(i, k)] * (p[(i, k)] / pz).ln();
                }
            }
        }
        let t = lemma2_terms(&j, &ConditionalModel::new(q).unwrap()).unwrap();
        assert!((t.cross_entropy - ce).abs() <= 1e-12, "case {case}");
        assert!((t.conditional_entropy - h).abs() <= 1e-12, "case {case}");
        assert!(t.kl >= -1e-12);
    }
}

#[test]
fn default_blobs_are_separable_by_nearest_neighbour() {
    let spec = SyntheticSpec::default();
    let (train, test) = generate_blobs(&spec).unwrap();
    let mut correct = 0;
    for i in 0..test.n() {
        let nearest = (0..train.n())
            .min_by(|&a, &b| {
                euclid(test.x.row(i), train.x.row(a))
                    .total_cmp(&euclid(test.x.row(i), train.x.row(b)))
            })
            .unwrap();
        if train.y.as_slice()[nearest] == test.y.as_slice()[i] {
            correct += 1;
        }
    }
    assert_eq!(correct, test.n());
}

#[test]
fn shuffled_labels_give_chance_recall() {
    // With labels independent of geometry, the nearest other sample is a
    // positive with probability (s − 1)/(n − 1) per query.
    let (n, k) = (400, 4);
    let mut r = seeded(610, 0);
    let z = gaussian(&mut r, n, 5, 1.0);
    let y: Vec<usize> = permutation(&mut r, n).into_iter().map(|i| i % k).collect();
    let b = EmbeddingBatch::new(z, LabelVector::new(y, k).unwrap()).unwrap();
    let got = recall_at_k(&b, &[1], Distance::Euclidean)
        .unwrap()
        .get(Distance::Euclidean, 1)
        .unwrap();
    let p = (n / k - 1) as f64 / (n - 1) as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (got - p).abs() <= 3.0 * sd,
        "recall {got}, expected {p} ± {}",
        3.0 * sd
    );
}
