//! Exact information measures on finite joint tables, the pairwise
//! differential-entropy estimator, and the isotropic Gaussian reference.
//!
//! Natural logarithms throughout; `0·log 0 = 0`.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sq_euclidean, Matrix};
use crate::scalar::Scalar;

/// Tolerance for the exact identities on joint tables.
pub const INFO_TOL: f64 = 1e-12;

/// Floor applied to squared distances by [`entropy_estimator`].
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[inline]
fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter().map(xlogx).sum::<f64>()
}

/// Joint distribution `p(ẑ, y)`: one row per embedding state, one column
/// per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix<f64>", into = "Matrix<f64>")]
pub struct DiscreteJoint {
    p: Matrix<f64>,
}

impl TryFrom<Matrix<f64>> for DiscreteJoint {
    type Error = Error;

    fn try_from(p: Matrix<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<DiscreteJoint> for Matrix<f64> {
    fn from(j: DiscreteJoint) -> Self {
        j.p
    }
}

impl DiscreteJoint {
    pub fn new(p: Matrix<f64>) -> Result<Self> {
        if p.data().is_empty() {
            return Err(Error::Precondition("joint table is empty".into()));
        }
        if p.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(
                "joint table has a negative entry".into(),
            ));
        }
        let total: f64 = p.data().iter().sum();
        if (total - 1.0).abs() > INFO_TOL {
            return Err(Error::InvalidParameter(format!(
                "joint table sums to {total}"
            )));
        }
        Ok(Self { p })
    }

    /// Normalizes non-negative weights into a joint table.
    pub fn from_weights(w: Matrix<f64>) -> Result<Self> {
        let total: f64 = w.data().iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "weights must have a positive sum".into(),
            ));
        }
        Self::new(w.scale(1.0 / total))
    }

    pub fn table(&self) -> &Matrix<f64> {
        &self.p
    }

    /// `p(ẑ)`.
    pub fn marginal_z(&self) -> Vec<f64> {
        self.p.row_iter().map(|r| r.iter().sum()).collect()
    }

    /// `p(y)`.
    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p.cols()];
        for r in self.p.row_iter() {
            for (a, &v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        m
    }

    pub fn entropy_y(&self) -> f64 {
        entropy(self.marginal_y())
    }

    pub fn entropy_z(&self) -> f64 {
        entropy(self.marginal_z())
    }

    /// `H(Y|Ẑ) = H(Ẑ,Y) − H(Ẑ)`, summed state by state.
    pub fn entropy_y_given_z(&self) -> f64 {
        self.p
            .row_iter()
            .zip(self.marginal_z())
            .map(|(r, pz)| -r.iter().map(|&p| xlogx(p)).sum::<f64>() + xlogx(pz))
            .sum()
    }

    /// `H(Ẑ|Y)`, summed class by class.
    pub fn entropy_z_given_y(&self) -> f64 {
        let joint = entropy(self.p.data().iter().copied());
        joint + self.marginal_y().into_iter().map(xlogx).sum::<f64>()
    }
}

/// Both decompositions of `I(Ẑ;Y)` with their entropy terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    /// `H(Y) − H(Y|Ẑ)`.
    pub discriminative: f64,
    /// `H(Ẑ) − H(Ẑ|Y)`.
    pub generative: f64,
    pub entropy_y: f64,
    pub entropy_y_given_z: f64,
    pub entropy_z: f64,
    pub entropy_z_given_y: f64,
}

pub fn mutual_information_both_views(j: &DiscreteJoint) -> MutualInformation {
    let entropy_y = j.entropy_y();
    let entropy_y_given_z = j.entropy_y_given_z();
    let entropy_z = j.entropy_z();
    let entropy_z_given_y = j.entropy_z_given_y();
    MutualInformation {
        discriminative: entropy_y - entropy_y_given_z,
        generative: entropy_z - entropy_z_given_y,
        entropy_y,
        entropy_y_given_z,
        entropy_z,
        entropy_z_given_y,
    }
}

/// The two views agree, and `0 ≤ I ≤ min(H(Y), H(Ẑ))`.
pub fn check_mutual_information(j: &DiscreteJoint) -> Vec<BoundCheck> {
    let mi = mutual_information_both_views(j);
    let witness = format!("joint {}x{}", j.p.rows(), j.p.cols());
    vec![
        BoundCheck::eq("mi_views_agree", mi.discriminative, mi.generative, INFO_TOL),
        BoundCheck::ge("mi_nonnegative", mi.discriminative, 0.0, INFO_TOL),
        BoundCheck::le(
            "mi_below_entropies",
            mi.discriminative,
            mi.entropy_y.min(mi.entropy_z),
            INFO_TOL,
        ),
    ]
    .into_iter()
    .map(|c| c.with_witness(witness.clone()))
    .collect()
}

/// A predictive distribution `q(ŷ|ẑ)`, one probability row per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix<f64>", into = "Matrix<f64>")]
pub struct ConditionalModel {
    q: Matrix<f64>,
}

impl TryFrom<Matrix<f64>> for ConditionalModel {
    type Error = Error;

    fn try_from(q: Matrix<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<ConditionalModel> for Matrix<f64> {
    fn from(m: ConditionalModel) -> Self {
        m.q
    }
}

impl ConditionalModel {
    pub fn new(q: Matrix<f64>) -> Result<Self> {
        for (i, r) in q.row_iter().enumerate() {
            let sum: f64 = r.iter().sum();
            if r.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > INFO_TOL {
                return Err(Error::NotProbability { row: i, sum });
            }
        }
        Ok(Self { q })
    }

    /// The true conditional `p(y|ẑ)` of a joint; states with zero mass get
    /// a uniform row.
    pub fn true_conditional(j: &DiscreteJoint) -> Self {
        let k = j.p.cols();
        let mut q = j.p.clone();
        for (i, pz) in j.marginal_z().into_iter().enumerate() {
            let row = q.row_mut(i);
            if pz > 0.0 {
                row.iter_mut().for_each(|v| *v /= pz);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
            }
        }
        Self { q }
    }

    pub fn table(&self) -> &Matrix<f64> {
        &self.q
    }
}

/// The three terms of the conditional cross-entropy decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Terms {
    /// `H(Y;Ŷ|Ẑ) = −Σ p(ẑ,y) log q(y|ẑ)`.
    pub cross_entropy: f64,
    /// `H(Y|Ẑ)`.
    pub conditional_entropy: f64,
    /// `D_KL(Y‖Ŷ|Ẑ) = Σ p(ẑ,y) log(p(y|ẑ)/q(y|ẑ))`.
    pub kl: f64,
}

pub fn lemma2_terms(j: &DiscreteJoint, m: &ConditionalModel) -> Result<Lemma2Terms> {
    if j.p.shape() != m.q.shape() {
        return Err(Error::Shape(format!(
            "joint is {:?}, model is {:?}",
            j.p.shape(),
            m.q.shape()
        )));
    }
    let mut cross_entropy = 0.0;
    let mut kl = 0.0;
    for (i, pz) in j.marginal_z().into_iter().enumerate() {
        for (k, (&p, &q)) in j.p.row(i).iter().zip(m.q.row(i)).enumerate() {
            if p == 0.0 {
                continue;
            }
            if q <= 0.0 {
                return Err(Error::Precondition(format!(
                    "model gives zero probability to state {i}, class {k} which has mass {p}"
                )));
            }
            cross_entropy -= p * q.ln();
            kl += p * ((p / pz).ln() - q.ln());
        }
    }
    Ok(Lemma2Terms {
        cross_entropy,
        conditional_entropy: j.entropy_y_given_z(),
        kl,
    })
}

/// Checks `H(Y;Ŷ|Ẑ) = H(Y|Ẑ) + D_KL(Y‖Ŷ|Ẑ)`.
///
/// Details also record the KL term, its sign, and the cross-entropy gap
/// left when the model is replaced by the true conditional (zero when
/// minimizing over `q` removes the KL term).
pub fn lemma2_identity(j: &DiscreteJoint, m: &ConditionalModel) -> Result<BoundCheck> {
    let t = lemma2_terms(j, m)?;
    let plug = lemma2_terms(j, &ConditionalModel::true_conditional(j))?;
    Ok(BoundCheck::eq(
        "lemma2_identity",
        t.cross_entropy,
        t.conditional_entropy + t.kl,
        INFO_TOL,
    )
    .with_witness(format!("joint {}x{}", j.p.rows(), j.p.cols()))
    .with_detail("conditional_entropy", t.conditional_entropy)
    .with_detail("kl", t.kl)
    .with_detail("plugin_gap", plug.cross_entropy - plug.conditional_entropy)
    .with_detail("plugin_kl", plug.kl))
}

/// `Ĥ = d/(n(n−1)) Σ_{i≠j} log D_ij²`, with squared distances floored at
/// `1e-12` (a warning is logged when that happens).
pub fn entropy_estimator<T: Scalar>(z: &Matrix<T>) -> Result<T> {
    let (n, d) = z.shape();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "entropy estimator needs n >= 2, got {n}"
        )));
    }
    let d2 = pairwise_sq_euclidean(z)?;
    let floor = T::of(DISTANCE_FLOOR);
    let mut clamped = 0usize;
    let mut sum = T::zero();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let v = d2[(i, j)];
            if v < floor {
                clamped += 1;
            }
            sum = sum + v.max(floor).ln();
        }
    }
    if clamped > 0 {
        warn!(
            "entropy estimator: {} ordered pairs of (near) duplicate points clamped",
            clamped
        );
    }
    Ok(T::of_usize(d) / T::of_usize(n * (n - 1)) * sum)
}

/// `(d/2) log(2πeσ²)`, the differential entropy of `N(μ, σ²I_d)`.
pub fn gaussian_conditional_entropy(d: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(d as f64 / 2.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln())
}

/// One row of [`gaussian_tightness_demo`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianDemoRow {
    pub sigma: f64,
    pub n: usize,
    /// Analytic `H(Ẑ|Y)` for the sampling distribution.
    pub analytic: f64,
    /// `(d/2) log 2π + (1/(2n)) Σ ‖z_i − c‖²`: the cross-entropy against a
    /// unit Gaussian around the sample mean, an upper bound on `H(Ẑ|Y)` up
    /// to sampling error, tight at `σ = 1`.
    pub tightness_bound: f64,
    pub gap: f64,
    /// [`entropy_estimator`] on the same sample.
    pub estimator: f64,
}

/// Samples `n` points of one class from `N(0, σ²I_d)` for each `σ` and `n`
/// and compares the Gaussian cross-entropy reading of the tightness term
/// with the analytic conditional entropy.
pub fn gaussian_tightness_demo<R: Rng>(
    rng: &mut R,
    d: usize,
    sigmas: &[f64],
    ns: &[usize],
) -> Result<Vec<GaussianDemoRow>> {
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let analytic = gaussian_conditional_entropy(d, sigma)?;
        for &n in ns {
            let z = Matrix::from_fn(n, d, |_, _| {
                let g: f64 = StandardNormal.sample(rng);
                sigma * g
            });
            let mut mean = vec![0.0; d];
            for r in z.row_iter() {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += v / n as f64;
                }
            }
            let spread: f64 = z
                .row_iter()
                .map(|r| crate::numeric::sq_dist(r, &mean))
                .sum();
            let tightness_bound =
                d as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln() + spread / (2.0 * n as f64);
            rows.push(GaussianDemoRow {
                sigma,
                n,
                analytic,
                tightness_bound,
                gap: tightness_bound - analytic,
                estimator: entropy_estimator(&z)?,
            });
        }
    }
    Ok(rows)
}
