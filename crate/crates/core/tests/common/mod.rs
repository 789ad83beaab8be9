//! Instance builders and brute-force oracles shared by the integration
//! tests. Nothing here calls into the code under test except for plain
//! data types.

#![allow(dead_code)]

use mll_core::numeric::{LabelVector, Matrix};
use mll_core::rng::{self, Rng};
use mll_core::EmbeddingBatch;
pub mod invariance;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn seeded(seed: u64, case: usize) -> Rng {
    rng::stream(seed, case as u64)
}

pub fn normal(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn gaussian(r: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| scale * normal(r))
}

/// Labels with every class holding at least `min_per_class` members.
pub fn labels(r: &mut Rng, n: usize, k: usize, min_per_class: usize) -> LabelVector {
    assert!(n >= k * min_per_class);
    let mut l: Vec<usize> = (0..n)
        .map(|i| {
            if i < k * min_per_class {
                i % k
            } else {
                r.random_range(0..k)
            }
        })
        .collect();
    l.shuffle(r);
    LabelVector::new(l, k).unwrap()
}

/// Random batch with `n ∈ [k·min, max_n]`, `d ∈ [1, max_d]`, `k ∈ [2, max_k]`.
pub fn batch(
    r: &mut Rng,
    max_n: usize,
    max_d: usize,
    max_k: usize,
    min_per_class: usize,
) -> EmbeddingBatch {
    batch_with_dim(r, max_n, 1, max_d, max_k, min_per_class)
}

pub fn batch_with_dim(
    r: &mut Rng,
    max_n: usize,
    min_d: usize,
    max_d: usize,
    max_k: usize,
    min_per_class: usize,
) -> EmbeddingBatch {
    let k = r.random_range(2..=max_k);
    let n = r.random_range(k * min_per_class..=max_n);
    let d = r.random_range(min_d..=max_d);
    let scale = r.random_range(0.2..2.0);
    EmbeddingBatch::new(gaussian(r, n, d, scale), labels(r, n, k, min_per_class)).unwrap()
}

pub fn permutation(r: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(r);
    p
}

/// Haar-ish orthogonal matrix by Gram–Schmidt on a Gaussian matrix.
pub fn orthogonal(r: &mut Rng, d: usize) -> Matrix<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| normal(r)).collect();
        for _ in 0..2 {
            for q in &rows {
                let c: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_rows(&rows).unwrap()
}

pub fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|l| a[(i, l)] * b[(l, j)]).sum()
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

pub fn unit_rows(z: &Matrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] / norm(z.row(i)))
}

/// Exact average precision of every query by sorting the others on
/// `1 − cos`, averaged over queries.
pub fn exact_mean_ap(b: &EmbeddingBatch) -> f64 {
    let n = b.n();
    let mut total = 0.0;
    for i in 0..n {
        let mut others: Vec<(f64, bool)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                (
                    1.0 - cosine(b.z.row(i), b.z.row(j)),
                    b.label(j) == b.label(i),
                )
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0));
        let npos = others.iter().filter(|o| o.1).count() as f64;
        let mut hits = 0.0;
        let mut ap = 0.0;
        for (rank, o) in others.iter().enumerate() {
            if o.1 {
                hits += 1.0;
                ap += hits / (rank + 1) as f64;
            }
        }
        total += ap / npos;
    }
    total / n as f64
}

/// Leave-one-out recall@k by fully sorting every query's neighbours on
/// `(distance, index)`. `cosine` selects `1 − cos` over Euclidean distance.
pub fn full_sort_recall(b: &EmbeddingBatch, k: usize, use_cosine: bool) -> (f64, usize) {
    let n = b.n();
    let mut hits = 0usize;
    let mut scored = 0usize;
    for i in 0..n {
        if !(0..n).any(|j| j != i && b.label(j) == b.label(i)) {
            continue;
        }
        scored += 1;
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d = if use_cosine {
                    1.0 - cosine(b.z.row(i), b.z.row(j))
                } else {
                    euclid(b.z.row(i), b.z.row(j))
                };
                (d, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if others
            .iter()
            .take(k)
            .any(|&(_, j)| b.label(j) == b.label(i))
        {
            hits += 1;
        }
    }
    let recall = if scored == 0 {
        0.0
    } else {
        hits as f64 / scored as f64
    };
    (recall, scored)
}

/// `Σ_k Σ_{i∈k} ‖z_i − c_k‖²` from explicit means.
pub fn center_sum(b: &EmbeddingBatch) -> f64 {
    let mut total = 0.0;
    for k in 0..b.num_classes() {
        let members: Vec<usize> = (0..b.n()).filter(|&i| b.label(i) == k).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..b.dim())
            .map(|j| members.iter().map(|&i| b.z[(i, j)]).sum::<f64>() / members.len() as f64)
            .collect();
        total += members
            .iter()
            .map(|&i| euclid(b.z.row(i), &mean).powi(2))
            .sum::<f64>();
    }
    total
}

/// `(1/(2|Z_k|)) Σ_{i,j∈k} ‖z_i − z_j‖²` summed over classes.
pub fn pairwise_center_sum(b: &EmbeddingBatch) -> f64 {
    let mut total = 0.0;
    for k in 0..b.num_classes() {
        let members: Vec<usize> = (0..b.n()).filter(|&i| b.label(i) == k).collect();
        if members.is_empty() {
            continue;
        }
        let mut s = 0.0;
        for &i in &members {
            for &j in &members {
                s += euclid(b.z.row(i), b.z.row(j)).powi(2);
            }
        }
        total += s / (2.0 * members.len() as f64);
    }
    total
}

pub fn ln_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
