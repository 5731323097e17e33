//! Run configuration: one TOML file covering the environment, policy,
//! optimizer, rewards, curriculum, evaluation, and benchmark sections.
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::SmoothnessMode;
use crate::es::EsConfig;
use crate::policy::ArchSpec;
use crate::rewards::{Curriculum, RewardConfig};
use crate::sim::EnvConfig;

/// Run mode; optional in the file, must match the subcommand when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
    Bench,
}

/// Policy section: architecture plus the optional action filter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub arch: ArchSpec,
    /// Low-pass action filter cutoff in Hz; absent disables the filter.
    pub action_filter_hz: Option<f64>,
}

/// Evaluation section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub episodes: usize,
    pub smoothness: SmoothnessMode,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            episodes: 2500,
            smoothness: SmoothnessMode::default(),
        }
    }
}

/// Benchmark section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    /// Episodes per measured worker count.
    pub episodes: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings { episodes: 128 }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    /// Output directory; overridable by flag or environment variable.
    pub out_dir: Option<PathBuf>,
    /// Rollout worker threads.
    pub workers: usize,
    /// Master seed (also the default for `es.seed` when that is 0).
    pub seed: u64,
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub es: EsConfig,
    /// Rewards for single-stage runs; ignored when a curriculum is present.
    pub rewards: RewardConfig,
    pub curriculum: Option<Curriculum>,
    pub eval: EvalSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            out_dir: None,
            workers: 1,
            seed: 0,
            env: EnvConfig::default(),
            policy: PolicyConfig::default(),
            es: EsConfig::default(),
            rewards: RewardConfig::sparse(),
            curriculum: None,
            eval: EvalSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.policy.arch.validate()?;
        self.es.validate()?;
        self.rewards.validate()?;
        if let Some(curriculum) = &self.curriculum {
            curriculum.validate()?;
        }
        if let Some(hz) = self.policy.action_filter_hz {
            // Designing the filter performs the full cutoff check.
            crate::policy::ButterworthCoeffs::lowpass(hz, 1.0 / self.env.control_dt)?;
        }
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes must be positive".into()));
        }
        if self.bench.episodes == 0 {
            return Err(Error::Config("bench.episodes must be positive".into()));
        }
        Ok(())
    }

    /// Seed resolution: an explicit `es.seed` wins, otherwise the run seed.
    pub fn effective_seed(&self) -> u64 {
        if self.es.seed != 0 {
            self.es.seed
        } else {
            self.seed
        }
    }

    /// The curriculum driving training: the configured stage list, or a
    /// single stage from the env distribution and the rewards section.
    pub fn effective_curriculum(&self) -> Curriculum {
        match &self.curriculum {
            Some(curriculum) => curriculum.clone(),
            None => Curriculum::single(self.env.throw.kind, self.rewards.clone()),
        }
    }
}
