use crate::error::{Error, Result};
use crate::losses::cosine::CosineGeometry;
use crate::losses::{EmbeddingBatch, LossReport};
use crate::numeric::Matrix;
use crate::scalar::Scalar;

/// Distance histogram of one query against the rest of the batch.
///
/// Distances are `1 − cos` quantized into `B` equal bins over `[0, 2]`.
/// Cumulative counts are inclusive: bin `b` counts everything in bins `0..=b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryHistogram {
    pub positives: Vec<usize>,
    pub all: Vec<usize>,
    pub n_pos: usize,
    pub n_all: usize,
}

/// Bin index of a `1 − cos` distance.
#[inline]
pub fn distance_bin<T: Scalar>(dist: T, bins: usize) -> usize {
    let d = dist.max(T::zero()).min(T::of(2.0));
    let b = (d * T::of_usize(bins) / T::of(2.0))
        .floor()
        .to_usize()
        .unwrap_or(0);
    b.min(bins - 1)
}

impl QueryHistogram {
    /// Builds the histogram from a query's distances and positive flags.
    pub fn from_distances<T: Scalar>(dists: &[T], positive: &[bool], bins: usize) -> Self {
        let mut pos = vec![0; bins];
        let mut all = vec![0; bins];
        for (&d, &p) in dists.iter().zip(positive) {
            let b = distance_bin(d, bins);
            all[b] += 1;
            if p {
                pos[b] += 1;
            }
        }
        Self {
            n_pos: pos.iter().sum(),
            n_all: dists.len(),
            positives: pos,
            all,
        }
    }

    /// `P(R⁺)`.
    pub fn prior(&self) -> f64 {
        self.n_pos as f64 / self.n_all as f64
    }

    /// Iterates `(h⁺_b, H⁺_b, H_b)` over bins holding at least one positive.
    fn occupied(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let mut cum_pos = 0usize;
        let mut cum_all = 0usize;
        self.positives
            .iter()
            .zip(&self.all)
            .filter_map(move |(&hp, &h)| {
                cum_pos += hp;
                cum_all += h;
                (hp > 0).then_some((hp as f64, cum_pos as f64, cum_all as f64))
            })
    }

    /// `Σ_d P(D<d|R⁺) P(R⁺) / P(D<d) · P(D=d|R⁺)`.
    pub fn fastap(&self) -> f64 {
        let np = self.n_pos as f64;
        let na = self.n_all as f64;
        self.occupied()
            .map(|(hp, cp, ca)| (cp / np) * (np / na) / (ca / na) * (hp / np))
            .sum()
    }

    /// `E_{d∼P(·|R⁺)} log P(D<d|R⁺)`.
    pub fn tightness(&self) -> f64 {
        let np = self.n_pos as f64;
        self.occupied()
            .map(|(hp, cp, _)| hp / np * (cp / np).ln())
            .sum()
    }

    /// `E_{d∼P(·|R⁺)} log P(D<d)`.
    pub fn contrastive(&self) -> f64 {
        let np = self.n_pos as f64;
        let na = self.n_all as f64;
        self.occupied()
            .map(|(hp, _, ca)| hp / np * (ca / na).ln())
            .sum()
    }

    /// Jensen lower bound on `log FastAP` with conditional weights `P(D=d|R⁺)`.
    pub fn jensen_bound(&self) -> f64 {
        self.tightness() + self.prior().ln() - self.contrastive()
    }

    /// The same expectation weighted by the joint `P(D=d, R⁺)` and without
    /// the prior inside the logarithm. Reported only; not a guaranteed bound.
    pub fn joint_weighted_form(&self) -> f64 {
        self.prior() * (self.tightness() - self.contrastive())
    }
}

/// Per-query histograms for a batch.
pub fn query_histograms<T: Scalar>(
    b: &EmbeddingBatch<T>,
    bins: usize,
) -> Result<Vec<QueryHistogram>> {
    if bins < 2 {
        return Err(Error::InvalidParameter(
            "FastAP needs at least 2 bins".into(),
        ));
    }
    let n = b.n();
    if n < 3 {
        return Err(Error::Precondition(format!("FastAP needs n >= 3, got {n}")));
    }
    let geo = CosineGeometry::new(&b.z)?;
    let sim: &Matrix<T> = &geo.sim;
    let mut out = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    let mut pos = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        pos.clear();
        for j in (0..n).filter(|&j| j != i) {
            dists.push(T::one() - sim[(i, j)]);
            pos.push(b.label(j) == b.label(i));
        }
        let h = QueryHistogram::from_distances(&dists, &pos, bins);
        if h.n_pos == 0 || h.n_pos == h.n_all {
            return Err(Error::QueryLacksPairs(i));
        }
        out.push(h);
    }
    Ok(out)
}

/// Histogram-binned average precision with its tightness/contrastive split.
///
/// `extras["fastap"]` is the mean FastAP over queries. The decomposed value
/// is the negated Jensen lower bound on `log FastAP`, averaged over queries:
/// tightness `−E log P(D<d|R⁺)`, contrastive `E log P(D<d) − log P(R⁺)`.
/// `extras["t_ap"]`, `extras["c_ap"]` hold the raw expectations and
/// `extras["joint_weighted_form"]` the joint-weighted variant.
pub fn fastap_loss<T: Scalar>(b: &EmbeddingBatch<T>, bins: usize) -> Result<LossReport<T>> {
    let hists = query_histograms(b, bins)?;
    let n = hists.len() as f64;
    let mean = |f: &dyn Fn(&QueryHistogram) -> f64| hists.iter().map(f).sum::<f64>() / n;
    let fastap = mean(&QueryHistogram::fastap);
    let t_ap = mean(&QueryHistogram::tightness);
    let c_ap = mean(&QueryHistogram::contrastive);
    let log_prior = mean(&|h| h.prior().ln());
    let log_fastap = mean(&|h| h.fastap().ln());
    let joint = mean(&QueryHistogram::joint_weighted_form);
    Ok(LossReport::new(T::of(-t_ap), T::of(c_ap - log_prior))
        .with_extra("fastap", T::of(fastap))
        .with_extra("log_fastap", T::of(log_fastap))
        .with_extra("t_ap", T::of(t_ap))
        .with_extra("c_ap", T::of(c_ap))
        .with_extra("log_prior", T::of(log_prior))
        .with_extra("joint_weighted_form", T::of(joint))
        .with_extra("bins", T::of_usize(bins)))
}
