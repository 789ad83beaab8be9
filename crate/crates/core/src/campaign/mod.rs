//! Seeded randomized campaigns over the verifiers.
//!
//! Trial `t` of verifier `v` draws its instance from its own stream
//! `(seed, v, t)`, so results do not depend on which other verifiers run,
//! on the trial count, or on thread scheduling.

mod generate;
mod instance;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::rng;

pub use generate::{generate, FASTAP_BINS, MAX_JOINT_SIDE};
pub use instance::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verifier {
    TightnessChain,
    ContrastiveChain,
    CePce,
    Hinge,
    FastapJensen,
    Lemma2,
    MutualInformation,
}

impl Verifier {
    pub const ALL: [Verifier; 7] = [
        Verifier::TightnessChain,
        Verifier::ContrastiveChain,
        Verifier::CePce,
        Verifier::Hinge,
        Verifier::FastapJensen,
        Verifier::Lemma2,
        Verifier::MutualInformation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verifier::TightnessChain => "tightness_chain",
            Verifier::ContrastiveChain => "contrastive_chain",
            Verifier::CePce => "ce_pce",
            Verifier::Hinge => "hinge",
            Verifier::FastapJensen => "fastap_jensen",
            Verifier::Lemma2 => "lemma2",
            Verifier::MutualInformation => "mutual_information",
        }
    }

    /// Stable group id used to derive the trial streams.
    fn stream_group(self) -> u32 {
        self as u32 + 1
    }
}

impl fmt::Display for Verifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Verifier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Verifier::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown verifier '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub verifiers: Vec<Verifier>,
    pub trials: usize,
    pub seed: u64,
    /// Replaces every check's own tolerance when set.
    pub tolerance: Option<f64>,
    /// Witnesses kept per verifier (lowest trial indices first); `None`
    /// keeps all of them.
    pub max_witnesses: Option<usize>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            verifiers: Verifier::ALL.to_vec(),
            trials: 1000,
            seed: 42,
            tolerance: None,
            max_witnesses: None,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.verifiers.is_empty() {
            return Err(Error::InvalidParameter("verifier list is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance must be finite and >= 0, got {t}"
                )));
            }
        }
        let mut seen = self.verifiers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.verifiers.len() {
            return Err(Error::InvalidParameter("verifier listed twice".into()));
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq)]
pub enum TrialOutcome {
    Pass { checks: Vec<BoundCheck> },
    Skip { reason: String },
    Violation { checks: Vec<BoundCheck> },
}

/// A failing instance with the checks it failed, ready to replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: u64,
    pub trial: usize,
    pub failed: Vec<BoundCheck>,
    pub instance: Instance,
}

impl Witness {
    pub fn file_name(&self) -> String {
        format!("{}-{:05}.json", self.instance.verifier(), self.trial)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub verifier: Verifier,
    pub trials: usize,
    pub passes: usize,
    pub skips: usize,
    pub violations: usize,
    pub skip_rate: f64,
    /// Violation count per check name (a trial can fail several).
    pub violations_by_check: BTreeMap<String, usize>,
    pub skip_reasons: BTreeMap<String, usize>,
    /// Least slack seen over all checks of all non-skipped trials.
    pub worst_slack: Option<f64>,
    pub worst: Option<WorstCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCheck {
    pub trial: usize,
    pub check: BoundCheck,
}

impl GroupSummary {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for GroupSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} trials {:>5}  passes {:>5}  skips {:>4}  violations {:>5}",
            self.verifier.name(),
            self.trials,
            self.passes,
            self.skips,
            self.violations
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                "  worst {} (slack {:.3e}, trial {})",
                w.check.name, w.check.slack, w.trial
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: Option<f64>,
    pub groups: Vec<GroupSummary>,
    #[serde(skip)]
    pub witnesses: Vec<Witness>,
}

impl CampaignReport {
    pub fn total_violations(&self) -> usize {
        self.groups.iter().map(|g| g.violations).sum()
    }

    pub fn group(&self, v: Verifier) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.verifier == v)
    }
}

/// Draws the instance of trial `trial` for verifier `v`.
pub fn trial_instance(v: Verifier, seed: u64, trial: usize) -> Instance {
    let trial = u32::try_from(trial).expect("trial index fits in 32 bits");
    let mut r = rng::stream(seed, rng::trial_stream(v.stream_group(), trial));
    generate(v, &mut r)
}

/// Runs an instance's checks, applying the tolerance override.
pub fn evaluate(instance: &Instance, tolerance: Option<f64>) -> TrialOutcome {
    match instance.check() {
        Err(e) => TrialOutcome::Skip {
            reason: skip_reason(&e),
        },
        Ok(checks) => {
            let checks: Vec<_> = match tolerance {
                Some(t) => checks.into_iter().map(|c| c.with_tolerance(t)).collect(),
                None => checks,
            };
            if checks.iter().all(|c| c.holds) {
                TrialOutcome::Pass { checks }
            } else {
                TrialOutcome::Violation { checks }
            }
        }
    }
}

fn skip_reason(e: &Error) -> String {
    match e {
        Error::LambdaDegenerate(_) => "lambda-degenerate".into(),
        Error::Precondition(_) => "precondition".into(),
        Error::QueryLacksPairs(_) => "query-lacks-pairs".into(),
        other => other.to_string(),
    }
}

/// Runs every configured verifier for `cfg.trials` trials on the current
/// rayon pool.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let mut groups = Vec::with_capacity(cfg.verifiers.len());
    let mut witnesses = Vec::new();
    for &v in &cfg.verifiers {
        let outcomes: Vec<(Instance, TrialOutcome)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let inst = trial_instance(v, cfg.seed, t);
                let out = evaluate(&inst, cfg.tolerance);
                (inst, out)
            })
            .collect();
        let (summary, w) = summarize(v, cfg, outcomes);
        log::info!("{summary}");
        groups.push(summary);
        witnesses.extend(w);
    }
    Ok(CampaignReport {
        seed: cfg.seed,
        trials: cfg.trials,
        tolerance: cfg.tolerance,
        groups,
        witnesses,
    })
}

fn summarize(
    v: Verifier,
    cfg: &CampaignConfig,
    outcomes: Vec<(Instance, TrialOutcome)>,
) -> (GroupSummary, Vec<Witness>) {
    let mut s = GroupSummary {
        verifier: v,
        trials: outcomes.len(),
        passes: 0,
        skips: 0,
        violations: 0,
        skip_rate: 0.0,
        violations_by_check: BTreeMap::new(),
        skip_reasons: BTreeMap::new(),
        worst_slack: None,
        worst: None,
    };
    let mut witnesses = Vec::new();
    let cap = cfg.max_witnesses.unwrap_or(usize::MAX);
    for (trial, (inst, out)) in outcomes.into_iter().enumerate() {
        let checks = match out {
            TrialOutcome::Skip { reason } => {
                s.skips += 1;
                *s.skip_reasons.entry(reason).or_default() += 1;
                continue;
            }
            TrialOutcome::Pass { checks } => {
                s.passes += 1;
                checks
            }
            TrialOutcome::Violation { checks } => {
                s.violations += 1;
                let failed: Vec<_> = checks.iter().filter(|c| !c.holds).cloned().collect();
                for c in &failed {
                    *s.violations_by_check.entry(c.name.clone()).or_default() += 1;
                }
                if witnesses.len() < cap {
                    witnesses.push(Witness {
                        seed: cfg.seed,
                        trial,
                        failed,
                        instance: inst,
                    });
                }
                checks
            }
        };
        for c in checks {
            if c.kind == crate::check::CheckKind::Inequality {
                s.worst_slack = Some(s.worst_slack.map_or(c.slack, |w: f64| w.min(c.slack)));
            }
            if s.worst.as_ref().is_none_or(|w| c.is_worse_than(&w.check)) {
                s.worst = Some(WorstCheck { trial, check: c });
            }
        }
    }
    s.skip_rate = s.skips as f64 / s.trials as f64;
    (s, witnesses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_streams_are_independent_of_other_groups() {
        let a = trial_instance(Verifier::Hinge, 7, 3);
        let b = trial_instance(Verifier::Hinge, 7, 3);
        assert_eq!(a, b);
        assert_ne!(a, trial_instance(Verifier::Hinge, 7, 4));
        assert_ne!(a, trial_instance(Verifier::Hinge, 8, 3));
    }

    #[test]
    fn generated_instances_satisfy_preconditions() {
        for v in Verifier::ALL {
            for t in 0..20 {
                let inst = trial_instance(v, 1, t);
                assert_eq!(inst.verifier(), v);
                match inst.check() {
                    Ok(_) => {}
                    Err(Error::LambdaDegenerate(_)) if v == Verifier::CePce => {}
                    Err(e) => panic!("{v} trial {t}: {e}"),
                }
            }
        }
    }

    #[test]
    fn instance_json_round_trip_replays() {
        for v in Verifier::ALL {
            let inst = trial_instance(v, 5, 0);
            let json = serde_json::to_string(&inst).unwrap();
            let back: Instance = serde_json::from_str(&json).unwrap();
            assert_eq!(back, inst);
            assert_eq!(evaluate(&back, None), evaluate(&inst, None));
        }
    }

    #[test]
    fn validation() {
        let mut c = CampaignConfig {
            verifiers: vec![],
            ..CampaignConfig::default()
        };
        assert!(c.validate().is_err());
        c.verifiers = vec![Verifier::Hinge, Verifier::Hinge];
        assert!(c.validate().is_err());
        c.verifiers = vec![Verifier::Hinge];
        c.tolerance = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_tolerance_flags_round_off() {
        let cfg = CampaignConfig {
            verifiers: vec![Verifier::TightnessChain],
            trials: 50,
            tolerance: Some(0.0),
            ..CampaignConfig::default()
        };
        assert!(run_campaign(&cfg).unwrap().total_violations() > 0);
    }
}
