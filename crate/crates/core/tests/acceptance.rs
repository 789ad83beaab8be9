//! The seven acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p mll-core --test acceptance -- --nocapture` to
//! see the report. Criteria listed in [`KNOWN_UNATTAINABLE`] are still
//! computed and printed; the test then requires that they fail, so a fix
//! that makes one pass shows up as a failure here until the entry is
//! removed.

mod common;

use std::time::{Duration, Instant};

use common::invariance;
use common::*;
use mll_core::bounds::center_identity;
use mll_core::campaign::{run_campaign, CampaignConfig, Verifier};
use mll_core::check::CheckKind;
use mll_core::eval::{recall_at_k, Distance};
use mll_core::losses::fastap_loss;
use mll_core::numeric::Matrix;
use mll_core::train::{
    alternating_bound_demo, generate_blobs, gradient_suite, train_model, GradSuiteConfig,
    SyntheticSpec, TrainConfig,
};
use mll_core::LossKind;
use rand::Rng as _;

/// Criteria that cannot hold as stated, with the reason printed next to
/// their FAIL line.
const KNOWN_UNATTAINABLE: [(usize, &str); 2] = [
    (
        1,
        "ce_pce: f2 is unbounded below along theta_k += v for all k, so CE >= PCE fails on most trials",
    ),
    (
        5,
        "same cause as criterion 1: every non-degenerate epoch has CE < PCE",
    ),
];

const SEED: u64 = 42;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: usize, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    Outcome {
        id,
        name,
        pass,
        detail,
        elapsed: start.elapsed(),
    }
}

fn bound_campaign() -> (bool, String) {
    let groups = [
        Verifier::TightnessChain,
        Verifier::ContrastiveChain,
        Verifier::CePce,
        Verifier::Hinge,
        Verifier::FastapJensen,
    ];
    let start = Instant::now();
    let report = run_campaign(&CampaignConfig {
        verifiers: groups.to_vec(),
        trials: 1000,
        seed: SEED,
        ..CampaignConfig::default()
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut pass = secs < 60.0;
    for g in &report.groups {
        pass &= g.violations == 0;
        if g.verifier == Verifier::CePce {
            pass &= g.skip_rate < 0.2;
        }
        parts.push(format!("{} {}v/{}s", g.verifier, g.violations, g.skips));
    }
    (pass, format!("{} in {secs:.2}s", parts.join(", ")))
}

/// The campaign groups other than `ce_pce` must be clean even while the
/// criterion as a whole is waived.
fn bound_campaign_without_ce_pce() -> (bool, String) {
    let report = run_campaign(&CampaignConfig {
        verifiers: vec![
            Verifier::TightnessChain,
            Verifier::ContrastiveChain,
            Verifier::Hinge,
            Verifier::FastapJensen,
        ],
        trials: 1000,
        seed: SEED,
        ..CampaignConfig::default()
    })
    .unwrap();
    (
        report.total_violations() == 0,
        format!("{} violations outside ce_pce", report.total_violations()),
    )
}

fn mi_equivalence() -> (bool, String) {
    let report = run_campaign(&CampaignConfig {
        verifiers: vec![Verifier::MutualInformation, Verifier::Lemma2],
        trials: 1000,
        seed: SEED,
        tolerance: Some(1e-12),
        ..CampaignConfig::default()
    })
    .unwrap();
    let detail = report
        .groups
        .iter()
        .map(|g| {
            format!(
                "{} {}/{} pass, worst slack {:.1e}",
                g.verifier,
                g.passes,
                g.trials,
                g.worst.as_ref().map_or(0.0, |w| w.check.slack)
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let pass = report.groups.iter().all(|g| g.passes == g.trials);
    (pass, detail)
}

fn gradient_suite_check() -> (bool, String) {
    let rows = gradient_suite(&GradSuiteConfig::default()).unwrap();
    let pass = rows.iter().all(|r| r.passed && r.batches == 50);
    let detail = rows
        .iter()
        .map(|r| format!("{} {:.1e}", r.loss, r.max_rel_error))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, format!("max relative error: {detail}"))
}

fn replication() -> (bool, String) {
    let start = Instant::now();
    let mut shrinking = 0;
    let mut min_recall: f64 = 1.0;
    for seed in 0..10u64 {
        let (train, test) = generate_blobs(&SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        assert_eq!((train.n(), test.n(), train.x.cols()), (256, 256, 16));
        for loss in [LossKind::CrossEntropy, LossKind::Spce] {
            let cfg = TrainConfig {
                loss,
                seed,
                label_smoothing: 0.0,
                ..TrainConfig::default()
            };
            assert_eq!((cfg.epochs, cfg.embedding_dim), (200, 8));
            let out = train_model(&train, &test, &cfg).unwrap();
            min_recall = min_recall.min(out.trace.last().unwrap().recall_at_1);
            if loss == LossKind::CrossEntropy {
                let (first, last) = out.trace.quartile_gaps().unwrap();
                if last < first {
                    shrinking += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        min_recall >= 0.95 && shrinking >= 8 && secs < 120.0,
        format!("min recall@1 {min_recall:.3}, gap shrinks on {shrinking}/10 seeds, {secs:.1}s"),
    )
}

fn bound_demo() -> (bool, String) {
    let mut violations = 0;
    let mut checked = 0;
    let mut degenerate = 0;
    for seed in 0..10u64 {
        let (train, _) = generate_blobs(&SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let trace = alternating_bound_demo(&train, &cfg, 30).unwrap();
        violations += trace.violations(mll_core::bounds::EIGEN_TOL).len();
        degenerate += trace.degenerate_epochs();
        checked += trace.rows.len() - trace.degenerate_epochs();
    }
    (
        violations == 0 && checked > 0,
        format!("{violations} violations over {checked} non-degenerate epochs ({degenerate} degenerate)"),
    )
}

fn oracle_equivalences() -> (bool, String) {
    let mut ap_worst: f64 = 0.0;
    for case in 0..100 {
        let b = batch_with_dim(&mut seeded(601, case), 30, 2, 8, 4, 2);
        let got = fastap_loss(&b, 10_000).unwrap().extra("fastap").unwrap();
        ap_worst = ap_worst.max((got - exact_mean_ap(&b)).abs());
    }
    let mut recall_mismatches = 0;
    for case in 0..100 {
        let b = batch(&mut seeded(602, case), 40, 6, 6, 1);
        let ks: Vec<usize> = [1, 2, 4, 8].into_iter().filter(|&k| k < b.n()).collect();
        for (dist, cos) in [(Distance::Euclidean, false), (Distance::Cosine, true)] {
            let got = recall_at_k(&b, &ks, dist).unwrap();
            for &k in &ks {
                if got.get(dist, k) != Some(full_sort_recall(&b, k, cos).0) {
                    recall_mismatches += 1;
                }
            }
        }
    }
    let mut center_worst: f64 = 0.0;
    let mut center_failed = 0;
    for case in 0..100 {
        let mut r = seeded(604, case);
        let b = batch(&mut r, 48, 8, 6, 1);
        let shift = r.random_range(-20.0..20.0);
        let b = b.with_z(Matrix::from_fn(b.n(), b.dim(), |i, j| {
            b.z[(i, j)] * 3.0 + shift
        }));
        for c in center_identity(&b).unwrap() {
            assert_eq!(c.kind, CheckKind::Equality);
            center_worst = center_worst.max((c.lhs - c.rhs).abs());
            center_failed += usize::from(!c.holds);
        }
    }
    (
        ap_worst <= 1e-3 && recall_mismatches == 0 && center_failed == 0,
        format!(
            "FastAP vs AP {ap_worst:.1e}, recall mismatches {recall_mismatches}, center identity worst {center_worst:.1e}"
        ),
    )
}

fn invariance_suite() -> (bool, String) {
    type Check = fn(&mut mll_core::rng::Rng) -> Result<f64, String>;
    let checks: [(&str, Check); 3] = [
        ("permutation", invariance::permutation_invariance),
        ("relabel", invariance::relabel_invariance),
        ("rotation", invariance::rotation_invariance),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, f)) in checks.iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for case in 0..200 {
            match f(&mut seeded(700 + i as u64, case)) {
                Ok(w) => worst = worst.max(w),
                Err(e) => {
                    failures += 1;
                    eprintln!("{name} case {case}: {e}");
                }
            }
        }
        pass &= failures == 0;
        parts.push(format!("{name} {}/200 worst {worst:.1e}", 200 - failures));
    }
    (pass, parts.join(", "))
}

#[test]
fn acceptance() {
    let outcomes = [
        timed(1, "bound campaign", bound_campaign),
        timed(2, "MI equivalence", mi_equivalence),
        timed(3, "gradient suite", gradient_suite_check),
        timed(4, "blob replication", replication),
        timed(5, "bound-optimization demo", bound_demo),
        timed(6, "oracle equivalences", oracle_equivalences),
        timed(7, "invariance suite", invariance_suite),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let waiver = KNOWN_UNATTAINABLE.iter().find(|(id, _)| *id == o.id);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = waiver.map_or(String::new(), |(_, why)| format!(" [known: {why}]"));
        println!(
            "criterion {} {}: {verdict} ({}; {:.1}s){note}",
            o.id,
            o.name,
            o.detail,
            o.elapsed.as_secs_f64()
        );
        if o.pass == waiver.is_some() {
            unexpected.push(o.id);
        }
    }
    let (rest_ok, rest) = bound_campaign_without_ce_pce();
    println!(
        "criterion 1 without ce_pce: {} ({rest})",
        if rest_ok { "PASS" } else { "FAIL" }
    );
    assert!(rest_ok, "campaign groups other than ce_pce must be clean");
    assert!(
        unexpected.is_empty(),
        "criteria {unexpected:?} did not match their expected outcome"
    );
}
