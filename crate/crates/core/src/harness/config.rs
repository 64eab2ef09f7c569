use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, VariantConfig};
use crate::envs::{make_gap_variant, GapKind, PendulumConfig};
use crate::error::{Error, Result};

/// Real pendulum and the kind of simulator perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub gap: GapKind,
    pub real: PendulumConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { gap: GapKind::Gravity, real: PendulumConfig::default() }
    }
}

impl EnvConfig {
    pub fn sim(&self) -> PendulumConfig {
        make_gap_variant(&self.real, self.gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Noisy rollouts of the first SAC snapshot past the return threshold.
    Medium,
    /// The SAC replay buffer at the moment of that snapshot.
    MediumReplay,
    /// Uniform random actions.
    Random,
}

/// How to build an offline dataset in the real environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetProtocol {
    pub kind: ProtocolKind,
    pub seed: u64,
    /// SAC training budget in the real environment.
    pub sac_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Snapshot threshold as a fraction of the way from random to converged return.
    pub threshold_fraction: f64,
    pub transitions: usize,
    pub noise_std: f64,
}

impl Default for DatasetProtocol {
    fn default() -> Self {
        DatasetProtocol {
            kind: ProtocolKind::Medium,
            seed: 0,
            sac_steps: 100_000,
            eval_every: 2_000,
            eval_episodes: 10,
            threshold_fraction: 0.5,
            transitions: 50_000,
            noise_std: 0.1,
        }
    }
}

impl DatasetProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.transitions == 0 || self.eval_episodes == 0 || self.eval_every == 0 {
            return Err(Error::Config("dataset protocol needs positive transitions, eval_every and eval_episodes".into()));
        }
        if self.kind != ProtocolKind::Random && self.sac_steps < self.eval_every {
            return Err(Error::Config("sac_steps must cover at least one evaluation".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold_fraction) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("threshold_fraction must lie in [0, 1] and noise_std be non-negative".into()));
        }
        Ok(())
    }
}

/// Either a dataset file or a protocol to generate one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub protocol: DatasetProtocol,
}

/// Everything a training run depends on. `(config, seed)` determines the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub out_dir: Option<PathBuf>,
    pub env: EnvConfig,
    pub variant: VariantConfig,
    pub agent: AgentConfig,
    pub dataset: DatasetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            total_steps: 100_000,
            eval_every: 2_000,
            eval_episodes: 10,
            out_dir: None,
            env: EnvConfig::default(),
            variant: VariantConfig::default(),
            agent: AgentConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_episodes == 0 || self.eval_every == 0 {
            return Err(Error::Config("eval_every and eval_episodes must be positive".into()));
        }
        self.env.real.validate()?;
        self.variant.validate()?;
        self.agent.validate()?;
        self.dataset.protocol.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
