use crate::check::BoundCheck;
use crate::error::Result;
use crate::losses::{query_histograms, EmbeddingBatch};

use super::{describe, LOG_TOL};

/// Checks `log FastAP_i ≥ Σ_d P(D=d|R⁺) log(P(D<d|R⁺) P(R⁺) / P(D<d))` for
/// every query and returns the query with the least slack.
pub fn verify_fastap_jensen(b: &EmbeddingBatch<f64>, bins: usize) -> Result<BoundCheck> {
    let hists = query_histograms(b, bins)?;
    let q = hists.len() as f64;
    let mean_log_fastap = hists.iter().map(|h| h.fastap().ln()).sum::<f64>() / q;
    let mean_bound = hists.iter().map(|h| h.jensen_bound()).sum::<f64>() / q;
    let mean_joint = hists.iter().map(|h| h.joint_weighted_form()).sum::<f64>() / q;
    let worst = BoundCheck::worst(
        "fastap_jensen",
        hists.iter().enumerate().map(|(i, h)| {
            BoundCheck::le("", h.jensen_bound(), h.fastap().ln(), LOG_TOL)
                .with_detail("query", i as f64)
        }),
    )
    .expect("query_histograms returns one histogram per sample");
    Ok(worst
        .with_witness(describe(b))
        .with_detail("bins", bins as f64)
        .with_detail("mean_log_fastap", mean_log_fastap)
        .with_detail("mean_bound", mean_bound)
        .with_detail("mean_joint_weighted_form", mean_joint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::QueryHistogram;
    use crate::numeric::{LabelVector, Matrix};

    #[test]
    fn single_bin_is_tight() {
        let b = EmbeddingBatch::new(
            Matrix::from_rows(&vec![vec![1.0, 1.0]; 4]).unwrap(),
            LabelVector::new(vec![0, 0, 1, 1], 2).unwrap(),
        )
        .unwrap();
        let c = verify_fastap_jensen(&b, 8).unwrap();
        assert!(c.holds);
        assert!(c.slack.abs() < 1e-15);
    }

    #[test]
    fn two_bin_histogram_by_hand() {
        // one positive in bin 0, one positive and one negative in bin 1
        let h = QueryHistogram::from_distances(&[0.1, 1.5, 1.6], &[true, true, false], 2);
        // FastAP = ½·(½·(2/3)/(1/3)) + ½·(1·(2/3)/1) = ½ + ⅓
        assert!((h.fastap() - 5.0 / 6.0).abs() < 1e-15);
        // bound = ½·ln(1) + ½·ln(2/3)
        assert!((h.jensen_bound() - 0.5 * (2.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(h.jensen_bound() <= h.fastap().ln());
    }
}
