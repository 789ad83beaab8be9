//! Retrieval recall@k under Euclidean and cosine distances.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::EmbeddingBatch;
use crate::numeric::{dot, l2_norm, sq_dist, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Euclidean,
    /// `1 − cosine similarity`.
    Cosine,
}

impl Distance {
    pub fn name(self) -> &'static str {
        match self {
            Distance::Euclidean => "euclidean",
            Distance::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" => Ok(Distance::Cosine),
            other => Err(format!("unknown distance '{other}'")),
        }
    }
}

/// Recall for each `k` and distance kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallResult {
    pub ks: Vec<usize>,
    /// One value per entry of `ks`.
    pub recall: BTreeMap<Distance, Vec<f64>>,
    /// Queries that were scored.
    pub queries: usize,
    /// Queries dropped for lacking a same-class candidate.
    pub excluded: usize,
}

impl RecallResult {
    pub fn get(&self, distance: Distance, k: usize) -> Option<f64> {
        let pos = self.ks.iter().position(|&x| x == k)?;
        self.recall.get(&distance).map(|v| v[pos])
    }

    /// Adds the distance kinds of `other`, which must cover the same `ks`.
    pub fn merge(mut self, other: RecallResult) -> Result<Self> {
        if self.ks != other.ks {
            return Err(Error::Shape(
                "recall results cover different k values".into(),
            ));
        }
        self.recall.extend(other.recall);
        Ok(self)
    }

    /// `distance,k,recall` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("distance,k,recall\n");
        for (d, vals) in &self.recall {
            for (k, r) in self.ks.iter().zip(vals) {
                let _ = writeln!(s, "{},{},{}", d.name(), k, r);
            }
        }
        s
    }
}

fn check_ks(ks: &[usize]) -> Result<usize> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidParameter(
            "k values must be non-empty and positive".into(),
        ));
    }
    Ok(*ks.iter().max().expect("non-empty"))
}

/// Row norms for cosine ranking, rejecting zero rows.
fn norms<T: Scalar>(z: &Matrix<T>) -> Result<Vec<T>> {
    z.row_iter()
        .enumerate()
        .map(|(i, r)| {
            let n = l2_norm(r);
            if n > T::tiny_norm() {
                Ok(n)
            } else {
                Err(Error::ZeroNormRow(i))
            }
        })
        .collect()
}

struct Ranker<'a, T> {
    distance: Distance,
    queries: &'a Matrix<T>,
    gallery: &'a Matrix<T>,
    q_norms: Vec<T>,
    g_norms: Vec<T>,
}

impl<'a, T: Scalar> Ranker<'a, T> {
    fn new(distance: Distance, queries: &'a Matrix<T>, gallery: &'a Matrix<T>) -> Result<Self> {
        let (q_norms, g_norms) = match distance {
            Distance::Cosine => (norms(queries)?, norms(gallery)?),
            Distance::Euclidean => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            distance,
            queries,
            gallery,
            q_norms,
            g_norms,
        })
    }

    fn dist(&self, q: usize, g: usize) -> T {
        let a = self.queries.row(q);
        let b = self.gallery.row(g);
        match self.distance {
            Distance::Euclidean => sq_dist(a, b),
            Distance::Cosine => T::one() - dot(a, b) / (self.q_norms[q] * self.g_norms[g]),
        }
    }

    /// Gallery indices by increasing distance, ties to the smaller index.
    fn ranking(&self, q: usize, skip: Option<usize>) -> Vec<usize> {
        let mut cand: Vec<(T, usize)> = (0..self.gallery.rows())
            .filter(|&g| Some(g) != skip)
            .map(|g| (self.dist(q, g), g))
            .collect();
        cand.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        });
        cand.into_iter().map(|(_, g)| g).collect()
    }
}

fn score(
    ranker: &Ranker<'_, impl Scalar>,
    q_labels: &[usize],
    g_labels: &[usize],
    ks: &[usize],
    self_exclude: bool,
) -> (Vec<f64>, usize, usize) {
    let mut hits = vec![0usize; ks.len()];
    let mut scored = 0usize;
    let mut excluded = 0usize;
    for (q, &yq) in q_labels.iter().enumerate() {
        let skip = self_exclude.then_some(q);
        let has_partner = g_labels
            .iter()
            .enumerate()
            .any(|(g, &yg)| yg == yq && Some(g) != skip);
        if !has_partner {
            excluded += 1;
            continue;
        }
        scored += 1;
        let rank = ranker.ranking(q, skip);
        let first = rank
            .iter()
            .position(|&g| g_labels[g] == yq)
            .expect("partner exists");
        for (h, &k) in hits.iter_mut().zip(ks) {
            if first < k {
                *h += 1;
            }
        }
    }
    if excluded > 0 {
        info!("recall: {excluded} queries without a same-class candidate excluded");
    }
    let recall = hits
        .into_iter()
        .map(|h| {
            if scored == 0 {
                0.0
            } else {
                h as f64 / scored as f64
            }
        })
        .collect();
    (recall, scored, excluded)
}

/// Leave-one-out recall@k within one set.
///
/// A query scores at `k` when one of its `k` nearest other samples shares
/// its label. Queries with no same-class partner are excluded and counted.
pub fn recall_at_k<T: Scalar>(
    b: &EmbeddingBatch<T>,
    ks: &[usize],
    distance: Distance,
) -> Result<RecallResult> {
    let kmax = check_ks(ks)?;
    if b.n() <= kmax {
        return Err(Error::Precondition(format!(
            "recall@{kmax} needs n > {kmax}, got {}",
            b.n()
        )));
    }
    let ranker = Ranker::new(distance, &b.z, &b.z)?;
    let labels = b.y.as_slice();
    let (recall, queries, excluded) = score(&ranker, labels, labels, ks, true);
    Ok(RecallResult {
        ks: ks.to_vec(),
        recall: BTreeMap::from([(distance, recall)]),
        queries,
        excluded,
    })
}

/// Recall@k of a query set against a disjoint gallery. Queries whose label
/// is absent from the gallery are excluded and counted.
pub fn query_gallery_recall<T: Scalar>(
    queries: &EmbeddingBatch<T>,
    gallery: &EmbeddingBatch<T>,
    ks: &[usize],
    distance: Distance,
) -> Result<RecallResult> {
    let kmax = check_ks(ks)?;
    if gallery.n() < kmax {
        return Err(Error::Precondition(format!(
            "recall@{kmax} needs a gallery of at least {kmax}, got {}",
            gallery.n()
        )));
    }
    if queries.dim() != gallery.dim() {
        return Err(Error::Shape(format!(
            "queries have dimension {}, gallery {}",
            queries.dim(),
            gallery.dim()
        )));
    }
    let ranker = Ranker::new(distance, &queries.z, &gallery.z)?;
    let (recall, n, excluded) = score(
        &ranker,
        queries.y.as_slice(),
        gallery.y.as_slice(),
        ks,
        false,
    );
    Ok(RecallResult {
        ks: ks.to_vec(),
        recall: BTreeMap::from([(distance, recall)]),
        queries: n,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LabelVector;

    fn batch(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> EmbeddingBatch<f64> {
        EmbeddingBatch::new(
            Matrix::from_rows(&rows).unwrap(),
            LabelVector::from_labels(labels).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn tight_clusters() {
        let b = batch(
            vec![
                vec![0.0, 0.0],
                vec![0.1, 0.0],
                vec![5.0, 5.0],
                vec![5.0, 5.1],
            ],
            vec![0, 0, 1, 1],
        );
        for d in [Distance::Euclidean, Distance::Cosine] {
            let r = recall_at_k(&b, &[1, 3], d);
            // the origin has zero norm under cosine
            if d == Distance::Cosine {
                assert!(matches!(r, Err(Error::ZeroNormRow(0))));
                continue;
            }
            let r = r.unwrap();
            assert_eq!(r.get(d, 1), Some(1.0));
            assert_eq!(r.get(d, 3), Some(1.0));
        }
    }

    #[test]
    fn ties_go_to_smaller_index() {
        // query 0 is equidistant from 1 (other class) and 2 (same class)
        let b = batch(
            vec![vec![0.0], vec![1.0], vec![-1.0], vec![7.0]],
            vec![0, 1, 0, 1],
        );
        let r = recall_at_k(&b, &[1, 2], Distance::Euclidean).unwrap();
        // query 0 misses at k=1; 1 → 0 (miss); 2 → 0 (hit); 3 → 1 (hit)
        assert_eq!(r.get(Distance::Euclidean, 1), Some(0.5));
    }

    #[test]
    fn lone_queries_are_excluded() {
        let b = batch(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 0, 1]);
        let r = recall_at_k(&b, &[1], Distance::Euclidean).unwrap();
        assert_eq!((r.queries, r.excluded), (2, 1));
    }

    #[test]
    fn k_too_large() {
        let b = batch(vec![vec![0.0], vec![1.0]], vec![0, 0]);
        assert!(recall_at_k(&b, &[2], Distance::Euclidean).is_err());
    }

    #[test]
    fn gallery_duplicate() {
        let q = batch(
            vec![vec![1.0, 0.2], vec![0.3, 1.0], vec![-1.0, 0.5]],
            vec![0, 1, 2],
        );
        let r = query_gallery_recall(&q, &q, &[1], Distance::Cosine).unwrap();
        assert_eq!(r.get(Distance::Cosine, 1), Some(1.0));
        let csv = r.to_csv();
        assert_eq!(csv, "distance,k,recall\ncosine,1,1\n");
    }
}
