use log::info;

use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::losses::{
    center_tightness, contrastive_loss, multi_similarity_loss, snca_loss, EmbeddingBatch,
    HyperParams,
};
use crate::numeric::{
    class_means, cosine_similarity, lse_unchecked, pairwise_sq_euclidean, sq_dist, Matrix,
};

use super::{describe, ALGEBRAIC_TOL};

/// Rows must have unit norm within `1e-9`.
pub fn require_unit_rows(z: &Matrix<f64>) -> Result<()> {
    for (i, r) in z.row_iter().enumerate() {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "row {i} has norm {norm}, expected unit rows"
            )));
        }
    }
    Ok(())
}

/// Every class in `[0, K)` must have the same, non-zero size. Returns it.
pub fn require_balanced(b: &EmbeddingBatch<f64>) -> Result<usize> {
    let counts = b.y.class_counts();
    let s = counts[0];
    if s == 0 || counts.iter().any(|&c| c != s) {
        return Err(Error::Precondition(format!(
            "classes are not balanced: sizes {counts:?}"
        )));
    }
    Ok(s)
}

/// `Σ_{z∈Z_k} ‖z − c_k‖² = (1/(2|Z_k|)) Σ_{i,j∈Z_k} ‖z_i − z_j‖²` per
/// non-empty class. Holds for any batch; no normalization or balance needed.
pub fn center_identity(b: &EmbeddingBatch<f64>) -> Result<Vec<BoundCheck>> {
    let witness = describe(b);
    let mut out = Vec::new();
    for (k, members) in b.y.members().iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let s = members.len() as f64;
        let mut mean = vec![0.0; b.dim()];
        for &i in members {
            for (m, v) in mean.iter_mut().zip(b.z.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= s);
        let lhs: f64 = members.iter().map(|&i| sq_dist(b.z.row(i), &mean)).sum();
        let pairs: f64 = members
            .iter()
            .flat_map(|&i| members.iter().map(move |&j| (i, j)))
            .map(|(i, j)| sq_dist(b.z.row(i), b.z.row(j)))
            .sum();
        out.push(
            BoundCheck::eq(
                format!("center_identity/class={k}"),
                lhs,
                pairs / (2.0 * s),
                ALGEBRAIC_TOL,
            )
            .with_witness(witness.clone())
            .with_detail("class", k as f64)
            .with_detail("class_size", s),
        );
    }
    Ok(out)
}

/// The tightness-side derivations linking center, contrastive, SNCA and
/// MS losses, one check per step and class.
///
/// Per class `k` with `s = |Z_k|`:
///
/// * the center identity (see [`center_identity`]);
/// * SNCA Jensen step
///   `−Σ_i log((1/(s−1)) Σ_{j≠i} e^{S_ij/σ}) ≤ −Σ_i Σ_{j≠i} S_ij/((s−1)σ)`,
///   the unit-sphere rewrite of the right side as
///   `Σ_{i,j≠i} ‖z_i−z_j‖²/(2σ(s−1)) − s/σ`, and the resulting pairwise
///   bound without the constant;
/// * MS with margin 1: dropping the `1 +` equals including `j = i`, then
///   `Σ_i (1/α) log((1/s) Σ_j e^{−α(S_ij−1)}) ≥ (1/s) Σ_{i,j} (1 − S_ij)`,
///   and the right side equals `(1/(2s)) Σ_{i,j} ‖z_i−z_j‖²`.
///
/// Batch-level checks tie the per-class sums to the loss functions
/// themselves. Requires unit rows and balanced classes; never normalizes.
pub fn verify_tightness_chain(b: &EmbeddingBatch<f64>, h: &HyperParams) -> Result<Vec<BoundCheck>> {
    h.validate()?;
    require_unit_rows(&b.z)?;
    let s = require_balanced(b)?;
    let witness = describe(b);
    let tol = ALGEBRAIC_TOL;
    let sim = cosine_similarity(&b.z)?;
    let d2 = pairwise_sq_euclidean(&b.z)?;
    let sigma = h.snca_sigma;
    let alpha = h.ms_alpha;
    let sf = s as f64;

    let mut out = center_identity(b)?;
    let mut snca_total = 0.0;
    let mut ms_total = 0.0;
    let mut exps = Vec::with_capacity(s);
    for (k, members) in b.y.members().iter().enumerate() {
        let tag = |name: &str| format!("{name}/class={k}");
        let pair_sum = |f: &dyn Fn(usize, usize) -> f64, skip_self: bool| -> f64 {
            members
                .iter()
                .flat_map(|&i| members.iter().map(move |&j| (i, j)))
                .filter(|&(i, j)| !(skip_self && i == j))
                .map(|(i, j)| f(i, j))
                .sum()
        };
        let d2_sum = pair_sum(&|i, j| d2[(i, j)], true);

        if s >= 2 {
            let mut lhs = 0.0;
            for &i in members {
                exps.clear();
                exps.extend(
                    members
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| sim[(i, j)] / sigma),
                );
                let lse = lse_unchecked(&exps);
                snca_total -= lse;
                lhs -= lse - ((s - 1) as f64).ln();
            }
            let jensen = -pair_sum(&|i, j| sim[(i, j)], true) / ((sf - 1.0) * sigma);
            let pairwise = d2_sum / (2.0 * sigma * (sf - 1.0));
            let mk = |c: BoundCheck| {
                c.with_witness(witness.clone())
                    .with_detail("class", k as f64)
            };
            out.push(mk(BoundCheck::le(tag("snca_jensen"), lhs, jensen, tol)));
            out.push(mk(BoundCheck::eq(
                tag("snca_unit_sphere"),
                jensen,
                pairwise - sf / sigma,
                tol,
            )));
            out.push(mk(BoundCheck::le(tag("snca_pairwise"), lhs, pairwise, tol)));
        }

        let mut with_one = 0.0;
        let mut all_terms = 0.0;
        for &i in members {
            exps.clear();
            exps.push(0.0);
            exps.extend(
                members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| -alpha * (sim[(i, j)] - 1.0)),
            );
            with_one += lse_unchecked(&exps) / alpha;
            exps.clear();
            exps.extend(members.iter().map(|&j| -alpha * (sim[(i, j)] - 1.0)));
            all_terms += lse_unchecked(&exps) / alpha;
        }
        ms_total += with_one;
        let mean_form = all_terms - sf * sf.ln() / alpha;
        let jensen = pair_sum(&|i, j| 1.0 - sim[(i, j)], false) / sf;
        let pairwise = pair_sum(&|i, j| d2[(i, j)], false) / (2.0 * sf);
        let mk = |c: BoundCheck| {
            c.with_witness(witness.clone())
                .with_detail("class", k as f64)
        };
        out.push(mk(BoundCheck::eq(
            tag("ms_self_term"),
            with_one,
            all_terms,
            tol,
        )));
        out.push(mk(BoundCheck::ge(tag("ms_jensen"), mean_form, jensen, tol)));
        out.push(mk(BoundCheck::eq(
            tag("ms_unit_sphere"),
            jensen,
            pairwise,
            tol,
        )));
    }

    let n = b.n() as f64;
    let mk = |c: BoundCheck| c.with_witness(witness.clone());
    let center = center_tightness(b)?.0.tightness;
    let means = class_means(&b.z, &b.y)?;
    let center_direct: f64 = (0..b.n())
        .map(|i| sq_dist(b.z.row(i), means.row(b.label(i))))
        .sum();
    out.push(mk(BoundCheck::eq(
        "center_matches_loss",
        2.0 * center,
        center_direct,
        tol,
    )));
    let contrastive_t = contrastive_loss(b, h)?.0.tightness;
    out.push(mk(BoundCheck::eq(
        "contrastive_equals_scaled_center",
        contrastive_t,
        2.0 * sf / n * center_direct,
        tol,
    )));
    if s >= 2 {
        let snca_t = snca_loss(b, h)?.0.tightness;
        out.push(mk(BoundCheck::eq(
            "snca_matches_loss",
            n * snca_t,
            snca_total,
            tol,
        )));
    }
    let ms_h = HyperParams {
        ms_margin: 1.0,
        ..*h
    };
    let ms_t = multi_similarity_loss(b, &ms_h)?.0.tightness;
    out.push(mk(BoundCheck::eq(
        "ms_matches_loss",
        n * ms_t,
        ms_total,
        tol,
    )));
    Ok(out)
}

/// The contrastive-side derivations: `C_MS` and `C_SNCA` bound
/// `−Σ D²` style terms from above.
///
/// Over the samples that have at least one negative (others are skipped
/// with a log notice), with `N_i` the negatives of `i`:
///
/// * `C_MS = (1/(βn)) Σ_i log(1 + Σ_{N_i} e^{β(S−1)})
///    ≥ (1/(βn)) Σ_i log Σ_{N_i} e^{β(S−1)}` (drop the one),
///   `≥ (1/n) Σ_i [log|N_i|/β + (1/|N_i|) Σ_{N_i} (S−1)]` (Jensen),
///   and `(1/|N_i|) Σ (S−1) = −(1/(2|N_i|)) Σ D²` on the sphere;
/// * `C_SNCA = (1/n) Σ_i log Σ_{j≠i} e^{S/σ}
///    ≥ (1/n) Σ_i log Σ_{N_i} e^{S/σ}` (drop the positives),
///   `≥ (1/n) Σ_i [log|N_i| + (1/|N_i|) Σ_{N_i} S/σ]` (Jensen),
///   and `S/σ = (1 − D²/2)/σ` on the sphere.
///
/// `C_MS` is also compared with [`multi_similarity_loss`] at margin 1.
pub fn verify_contrastive_chain(
    b: &EmbeddingBatch<f64>,
    h: &HyperParams,
) -> Result<Vec<BoundCheck>> {
    h.validate()?;
    require_unit_rows(&b.z)?;
    let witness = describe(b);
    let tol = ALGEBRAIC_TOL;
    let sim = cosine_similarity(&b.z)?;
    let d2 = pairwise_sq_euclidean(&b.z)?;
    let n = b.n();
    let beta = h.ms_beta;
    let sigma = h.snca_sigma;

    let mut ms = [0.0; 5];
    let mut snca = [0.0; 5];
    let mut used = 0usize;
    let mut exps = Vec::with_capacity(n);
    for i in 0..n {
        let yi = b.label(i);
        let neg: Vec<usize> = (0..n).filter(|&j| b.label(j) != yi).collect();
        if neg.is_empty() {
            info!("contrastive chain: sample {i} has no negatives, skipped");
            continue;
        }
        used += 1;
        let m = neg.len() as f64;

        exps.clear();
        exps.push(0.0);
        exps.extend(neg.iter().map(|&j| beta * (sim[(i, j)] - 1.0)));
        ms[0] += lse_unchecked(&exps) / beta;
        ms[1] += lse_unchecked(&exps[1..]) / beta;
        ms[2] += m.ln() / beta + neg.iter().map(|&j| sim[(i, j)] - 1.0).sum::<f64>() / m;
        ms[3] += m.ln() / beta - neg.iter().map(|&j| d2[(i, j)]).sum::<f64>() / (2.0 * m);

        exps.clear();
        exps.extend((0..n).filter(|&j| j != i).map(|j| sim[(i, j)] / sigma));
        snca[0] += lse_unchecked(&exps);
        exps.clear();
        exps.extend(neg.iter().map(|&j| sim[(i, j)] / sigma));
        snca[1] += lse_unchecked(&exps);
        snca[2] += m.ln() + neg.iter().map(|&j| sim[(i, j)]).sum::<f64>() / (m * sigma);
        snca[3] += m.ln() + neg.iter().map(|&j| 1.0 - d2[(i, j)] / 2.0).sum::<f64>() / (m * sigma);
    }
    if used == 0 {
        info!("contrastive chain: no sample has a negative, nothing to check");
        return Ok(Vec::new());
    }
    let inv_n = 1.0 / n as f64;
    ms.iter_mut()
        .chain(snca.iter_mut())
        .for_each(|v| *v *= inv_n);

    let mk = |c: BoundCheck| {
        c.with_witness(witness.clone())
            .with_detail("samples", used as f64)
    };
    let mut out = vec![
        mk(BoundCheck::ge("ms_drop_one", ms[0], ms[1], tol)),
        mk(BoundCheck::ge("ms_jensen", ms[1], ms[2], tol)),
        mk(BoundCheck::eq("ms_unit_sphere", ms[2], ms[3], tol)),
        mk(BoundCheck::ge("snca_drop_positives", snca[0], snca[1], tol)),
        mk(BoundCheck::ge("snca_jensen", snca[1], snca[2], tol)),
        mk(BoundCheck::eq("snca_unit_sphere", snca[2], snca[3], tol)),
    ];
    if used == n {
        let ms_h = HyperParams {
            ms_margin: 1.0,
            ..*h
        };
        let c_ms = multi_similarity_loss(b, &ms_h)?.0.contrastive;
        out.push(mk(BoundCheck::eq("ms_matches_loss", c_ms, ms[0], tol)));
    }
    Ok(out)
}
