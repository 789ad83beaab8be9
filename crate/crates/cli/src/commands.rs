use std::fs;
use std::path::Path;

use log::{info, warn};
use mll_core::campaign::{self, evaluate, run_campaign, Instance, TrialOutcome, Witness};
use mll_core::eval::{recall_at_k, Distance, RecallResult};
use mll_core::info::{
    gaussian_tightness_demo, lemma2_terms, mutual_information_both_views, GaussianDemoRow,
    Lemma2Terms, MutualInformation,
};
use mll_core::io::{read_label_file, read_matrix};
use mll_core::train::{
    alternating_bound_demo, generate_blobs, gradient_suite, train_model, BoundDemoRow,
    GradSuiteConfig, GradSuiteRow, TraceRow, TrainTrace,
};
use mll_core::{rng, BoundCheck, EmbeddingBatch, Error, LabelVector};
use serde::{Deserialize, Serialize};

use crate::config::{
    self, invalid, CliError, EvalConfig, MiDemoConfig, TrainFileConfig, TrainMode, VerifyConfig,
};
use crate::output::{OutDir, TRACE};
use crate::{EvalArgs, Globals};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::Failed
        }
    }
}

fn ignore_trials(g: &Globals, command: &str) {
    if g.trials.is_some() {
        warn!("--trials has no effect on {command}");
    }
}

/// A replay file holds either a bare instance or a full witness.
#[derive(Deserialize)]
#[serde(untagged)]
enum ReplayFile {
    Witness(Witness),
    Instance(Instance),
}

#[derive(Serialize)]
struct ReplayResult {
    file: String,
    verifier: String,
    outcome: &'static str,
    reason: Option<String>,
    checks: Vec<BoundCheck>,
}

fn replay(cfg: &VerifyConfig, out: &OutDir) -> Result<Status, CliError> {
    let mut results = Vec::new();
    for path in &cfg.replay {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let inst = match serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("replay file {}: {e}", path.display())))?
        {
            ReplayFile::Witness(w) => w.instance,
            ReplayFile::Instance(i) => i,
        };
        let (outcome, reason, checks) = match evaluate(&inst, cfg.tolerance) {
            TrialOutcome::Pass { checks } => ("pass", None, checks),
            TrialOutcome::Violation { checks } => ("violation", None, checks),
            TrialOutcome::Skip { reason } => ("skip", Some(reason), Vec::new()),
        };
        println!("{} {}: {outcome}", path.display(), inst.verifier());
        for c in checks.iter().filter(|c| !c.holds) {
            println!("  {c}");
        }
        results.push(ReplayResult {
            file: path.display().to_string(),
            verifier: inst.verifier().to_string(),
            outcome,
            reason,
            checks,
        });
    }
    let ok = results.iter().all(|r| r.outcome != "violation");
    out.write_summary("verify", ok, &results)?;
    Ok(Status::from_ok(ok))
}

pub fn verify(g: &Globals) -> Result<Status, CliError> {
    let mut cfg: VerifyConfig = config::load(g.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.trials {
        cfg.trials = t;
    }
    let out = OutDir::create(&g.out)?;
    if !cfg.replay.is_empty() {
        return replay(&cfg, &out);
    }
    let campaign = cfg.campaign();
    campaign.validate().map_err(invalid)?;
    let report = run_campaign(&campaign)?;
    for group in &report.groups {
        println!("{group}");
    }
    let dir = out.fresh_witness_dir()?;
    for w in &report.witnesses {
        let p = dir.join(w.file_name());
        let text = serde_json::to_string_pretty(w).expect("witness serializes") + "\n";
        fs::write(&p, text).map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
    }
    let ok = report.total_violations() == 0;
    if !ok {
        println!(
            "{} violating trials; {} witnesses in {}",
            report.total_violations(),
            report.witnesses.len(),
            dir.display()
        );
    }
    out.write_summary("verify", ok, &report)?;
    Ok(Status::from_ok(ok))
}

#[derive(Serialize)]
struct TrainResult<'a> {
    config: &'a TrainFileConfig,
    parameters: Option<usize>,
    final_row: Option<TraceRow>,
    quartile_gaps: Option<(f64, f64)>,
    recall: Option<RecallResult>,
    diverged_at: Option<usize>,
}

#[derive(Serialize)]
struct BoundDemoResult<'a> {
    config: &'a TrainFileConfig,
    epochs: usize,
    degenerate_epochs: usize,
    violating_epochs: Vec<usize>,
    final_row: Option<BoundDemoRow>,
}

fn test_recall(
    cfg: &TrainFileConfig,
    z: mll_core::Matrix,
    y: &LabelVector,
) -> Result<RecallResult, CliError> {
    let z = if cfg.train.normalize {
        z.normalized_rows()?
    } else {
        z
    };
    let b = EmbeddingBatch::new(z, y.clone())?;
    let ks: Vec<usize> = cfg.ks.iter().copied().filter(|&k| k < b.n()).collect();
    if ks.len() < cfg.ks.len() {
        warn!(
            "recall cut-offs at or above the test size ({}) dropped",
            b.n()
        );
    }
    let e = recall_at_k(&b, &ks, Distance::Euclidean)?;
    Ok(e.merge(recall_at_k(&b, &ks, Distance::Cosine)?)?)
}

pub fn train(g: &Globals) -> Result<Status, CliError> {
    let mut cfg: TrainFileConfig = config::load(g.config.as_deref())?;
    ignore_trials(g, "train");
    if let Some(s) = g.seed {
        cfg.data.seed = s;
        cfg.train.seed = s;
    }
    cfg.data.validate().map_err(invalid)?;
    cfg.train.validate().map_err(invalid)?;
    if cfg.ks.is_empty() || cfg.ks.contains(&0) {
        return Err(CliError::Config(
            "ks must be a non-empty list of positive integers".into(),
        ));
    }
    let out = OutDir::create(&g.out)?;
    let (train_set, test_set) = generate_blobs(&cfg.data)?;

    if cfg.mode == TrainMode::BoundDemo {
        let trace = alternating_bound_demo(&train_set, &cfg.train, cfg.train.epochs)?;
        out.write(TRACE, trace.to_csv().as_bytes())?;
        let violating_epochs = trace.violations(mll_core::bounds::EIGEN_TOL);
        let ok = violating_epochs.is_empty();
        println!(
            "bound demo: {} epochs, {} degenerate, {} with CE < PCE",
            trace.rows.len(),
            trace.degenerate_epochs(),
            violating_epochs.len()
        );
        out.write_summary(
            "train",
            ok,
            &BoundDemoResult {
                config: &cfg,
                epochs: trace.rows.len(),
                degenerate_epochs: trace.degenerate_epochs(),
                violating_epochs,
                final_row: trace.rows.last().copied(),
            },
        )?;
        return Ok(Status::from_ok(ok));
    }

    match train_model(&train_set, &test_set, &cfg.train) {
        Ok(outcome) => {
            out.write(TRACE, outcome.trace.to_csv().as_bytes())?;
            let recall = test_recall(&cfg, outcome.params.embed(&test_set.x)?, &test_set.y)?;
            for d in [Distance::Euclidean, Distance::Cosine] {
                let line: Vec<String> = recall
                    .ks
                    .iter()
                    .map(|&k| format!("R@{k}={:.4}", recall.get(d, k).unwrap_or(f64::NAN)))
                    .collect();
                println!("{:<9} {}", d.name(), line.join(" "));
            }
            out.write_summary(
                "train",
                true,
                &TrainResult {
                    config: &cfg,
                    parameters: Some(outcome.params.num_parameters()),
                    final_row: outcome.trace.last().copied(),
                    quartile_gaps: outcome.trace.quartile_gaps(),
                    recall: Some(recall),
                    diverged_at: None,
                },
            )?;
            Ok(Status::Ok)
        }
        Err(Error::Diverged { epoch, trace }) => {
            let trace: TrainTrace = *trace;
            out.write(TRACE, trace.to_csv().as_bytes())?;
            eprintln!("training diverged at epoch {epoch}; partial trace written");
            out.write_summary(
                "train",
                false,
                &TrainResult {
                    config: &cfg,
                    parameters: None,
                    final_row: trace.last().copied(),
                    quartile_gaps: None,
                    recall: None,
                    diverged_at: Some(epoch),
                },
            )?;
            Ok(Status::Failed)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct GradCheckResult<'a> {
    config: &'a GradSuiteConfig,
    losses: Vec<GradSuiteRow>,
}

pub fn grad_check(g: &Globals) -> Result<Status, CliError> {
    let mut cfg: GradSuiteConfig = config::load(g.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.trials {
        cfg.batches = t;
    }
    cfg.validate().map_err(invalid)?;
    let out = OutDir::create(&g.out)?;
    let rows = gradient_suite(&cfg)?;
    for r in &rows {
        println!(
            "{:<12} max rel error {:.3e} over {} batches ({} coords, {} excluded) [{}]",
            r.loss.name(),
            r.max_rel_error,
            r.batches,
            r.checked,
            r.excluded,
            if r.passed { "ok" } else { "FAILED" }
        );
    }
    let ok = rows.iter().all(|r| r.passed);
    out.write_summary(
        "grad-check",
        ok,
        &GradCheckResult {
            config: &cfg,
            losses: rows,
        },
    )?;
    Ok(Status::from_ok(ok))
}

#[derive(Serialize)]
struct JointReport {
    shape: (usize, usize),
    mutual_information: MutualInformation,
    lemma2: Lemma2Terms,
    checks: Vec<BoundCheck>,
}

#[derive(Serialize)]
struct MiDemoResult<'a> {
    config: &'a MiDemoConfig,
    joints: Vec<JointReport>,
    gaussian: Vec<GaussianDemoRow>,
}

pub fn mi_demo(g: &Globals) -> Result<Status, CliError> {
    let mut cfg: MiDemoConfig = config::load(g.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.trials {
        cfg.joints = t;
    }
    if cfg.dim == 0 || cfg.sigmas.iter().any(|s| !(*s > 0.0)) || cfg.sizes.iter().any(|&n| n < 2) {
        return Err(CliError::Config(
            "need dim >= 1, positive sigmas and sizes >= 2".into(),
        ));
    }
    let out = OutDir::create(&g.out)?;
    let mut joints = Vec::with_capacity(cfg.joints);
    for t in 0..cfg.joints {
        let Instance::Lemma2 { joint, model } =
            campaign::trial_instance(campaign::Verifier::Lemma2, cfg.seed, t)
        else {
            unreachable!("lemma2 trials generate lemma2 instances");
        };
        let mi = mutual_information_both_views(&joint);
        let lemma2 = lemma2_terms(&joint, &model)?;
        let mut checks = mll_core::info::check_mutual_information(&joint);
        checks.push(mll_core::info::lemma2_identity(&joint, &model)?);
        println!(
            "joint {}x{}: H(Y)-H(Y|Z) = {:.12}  H(Z)-H(Z|Y) = {:.12}  H(Y;Q|Z) = {:.6} = {:.6} + {:.6}",
            joint.table().rows(),
            joint.table().cols(),
            mi.discriminative,
            mi.generative,
            lemma2.cross_entropy,
            lemma2.conditional_entropy,
            lemma2.kl
        );
        joints.push(JointReport {
            shape: joint.table().shape(),
            mutual_information: mi,
            lemma2,
            checks,
        });
    }
    let mut r = rng::stream(cfg.seed, rng::trial_stream(0x6d69, 0));
    let gaussian = gaussian_tightness_demo(&mut r, cfg.dim, &cfg.sigmas, &cfg.sizes)?;
    println!(
        "{:>8} {:>6} {:>12} {:>12} {:>12}",
        "sigma", "n", "H(Z|Y)", "bound", "estimator"
    );
    for row in &gaussian {
        println!(
            "{:>8} {:>6} {:>12.6} {:>12.6} {:>12.6}",
            row.sigma, row.n, row.analytic, row.tightness_bound, row.estimator
        );
    }
    let ok = joints.iter().flat_map(|j| &j.checks).all(|c| c.holds);
    out.write_summary(
        "mi-demo",
        ok,
        &MiDemoResult {
            config: &cfg,
            joints,
            gaussian,
        },
    )?;
    Ok(Status::from_ok(ok))
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| {
        CliError::Config(format!(
            "eval-recall needs --{what} (or \"{what}\" in the config)"
        ))
    })
}

pub fn eval_recall(g: &Globals, args: EvalArgs) -> Result<Status, CliError> {
    let mut cfg: EvalConfig = config::load(g.config.as_deref())?;
    ignore_trials(g, "eval-recall");
    if let Some(p) = args.embeddings {
        cfg.embeddings = Some(p);
    }
    if let Some(p) = args.labels {
        cfg.labels = Some(p);
    }
    if let Some(ks) = args.ks {
        cfg.ks = ks;
    }
    if let Some(d) = args.distance {
        cfg.distances = d;
    }
    if cfg.ks.is_empty() || cfg.ks.contains(&0) || cfg.distances.is_empty() {
        return Err(CliError::Config(
            "need positive ks and at least one distance".into(),
        ));
    }
    let z = read_matrix(required(&cfg.embeddings, "embeddings")?).map_err(invalid)?;
    let y = read_label_file(required(&cfg.labels, "labels")?).map_err(invalid)?;
    let b = EmbeddingBatch::new(z, y).map_err(invalid)?;
    let mut result: Option<RecallResult> = None;
    for &d in &cfg.distances {
        let r = recall_at_k(&b, &cfg.ks, d).map_err(invalid)?;
        result = Some(match result {
            None => r,
            Some(acc) => acc.merge(r)?,
        });
    }
    let result = result.expect("at least one distance");
    info!(
        "{} queries scored, {} excluded",
        result.queries, result.excluded
    );
    print!("{}", result.to_csv());
    let out = OutDir::create(&g.out)?;
    out.write("recall.csv", result.to_csv().as_bytes())?;
    out.write_summary("eval-recall", true, &result)?;
    Ok(Status::Ok)
}
