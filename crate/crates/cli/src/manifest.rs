//! Run manifest: which scenario to run, all configuration blobs and where
//! outputs go.

use std::path::{Path, PathBuf};

use radar_fidelity::dem::{DatasetSpec, ModelConfig, TrainConfig};
use radar_fidelity::radar::{RadarConfig, SurrogateParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::read_input;

/// Environment variable that replaces the manifest seed.
pub const SEED_ENV: &str = "RADAR_FIDELITY_SEED";

fn default_runs() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Track CSV of the evaluated scenario (sidecar JSON next to it).
    pub scenario: PathBuf,
    /// Scenarios used to build the classifier's dataset. Defaults to the
    /// evaluated scenario alone.
    #[serde(default)]
    pub train_scenarios: Vec<PathBuf>,
    #[serde(default)]
    pub radar: RadarConfig,
    #[serde(default)]
    pub surrogate: SurrogateParams,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tool_version: Option<String>,
}

impl RunManifest {
    /// Parses a manifest file. Relative paths inside it are resolved against
    /// the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_input(path)?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut m.scenario);
        m.train_scenarios.iter_mut().for_each(resolve);
        resolve(&mut m.output_dir);
        Ok(m)
    }

    /// Checks the invariants that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(CliError::invalid("n_runs must be at least 1"));
        }
        self.surrogate
            .validate()
            .map_err(|e| CliError::invalid(e.to_string()))?;
        self.model
            .validate()
            .map_err(|e| CliError::invalid(e.to_string()))?;
        self.dataset
            .validate()
            .map_err(|e| CliError::invalid(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| CliError::invalid(e.to_string()))?;
        for p in std::iter::once(&self.scenario).chain(&self.train_scenarios) {
            if !p.exists() {
                return Err(CliError::Missing(p.clone()));
            }
        }
        Ok(())
    }

    /// Applies a seed given through [`SEED_ENV`], if any.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| {
                CliError::invalid(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))
            })?;
        }
        Ok(())
    }

    pub fn training_scenarios(&self) -> Vec<PathBuf> {
        if self.train_scenarios.is_empty() {
            vec![self.scenario.clone()]
        } else {
            self.train_scenarios.clone()
        }
    }

    /// Seed of simulation run `k`.
    pub fn run_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}
