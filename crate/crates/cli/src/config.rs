//! Configuration files and the error type that maps onto exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use mll_core::campaign::{CampaignConfig, Verifier};
use mll_core::eval::Distance;
use mll_core::train::{SyntheticSpec, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mll_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Core validation failures of a user-supplied configuration.
pub fn invalid(e: mll_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Reads a JSON configuration, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub verifiers: Vec<Verifier>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub max_witnesses: Option<usize>,
    /// Witness or instance files to re-run instead of a random campaign.
    pub replay: Vec<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let c = CampaignConfig::default();
        Self {
            verifiers: c.verifiers,
            trials: c.trials,
            seed: c.seed,
            tolerance: c.tolerance,
            max_witnesses: c.max_witnesses,
            replay: Vec::new(),
        }
    }
}

impl VerifyConfig {
    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            verifiers: self.verifiers.clone(),
            trials: self.trials,
            seed: self.seed,
            tolerance: self.tolerance,
            max_witnesses: self.max_witnesses,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    #[default]
    Train,
    BoundDemo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFileConfig {
    pub mode: TrainMode,
    pub data: SyntheticSpec,
    pub train: TrainConfig,
    /// Recall cut-offs for the final held-out evaluation.
    pub ks: Vec<usize>,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Train,
            data: SyntheticSpec::default(),
            train: TrainConfig::default(),
            ks: vec![1, 2, 4, 8],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiDemoConfig {
    pub seed: u64,
    /// Random joint tables (each paired with a random predictive model).
    pub joints: usize,
    pub dim: usize,
    pub sigmas: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for MiDemoConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            joints: 5,
            dim: 4,
            sigmas: vec![0.25, 0.5, 1.0, 2.0],
            sizes: vec![100, 400, 1600],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub embeddings: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub ks: Vec<usize>,
    pub distances: Vec<Distance>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            embeddings: None,
            labels: None,
            ks: vec![1, 2, 4, 8],
            distances: vec![Distance::Euclidean, Distance::Cosine],
        }
    }
}
