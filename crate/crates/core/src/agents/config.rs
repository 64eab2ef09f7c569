use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// SAC trained purely in the simulator.
    Sac,
    /// SAC on equal real and sim minibatches; the all-flags-off corner of H2O.
    SacMixed,
    /// Offline CQL on the real dataset.
    Cql,
    /// SAC in the simulator with the classifier reward correction.
    Darc,
    /// DARC plus real offline batches in the critic and actor updates.
    DarcPlus,
    /// Gap-weighted log-sum-exp regularizer with importance-weighted sim TD errors.
    H2o,
    /// H2O with the log-sum-exp replaced by the omega-weighted mean.
    H2oV,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Sac,
        Algorithm::SacMixed,
        Algorithm::Cql,
        Algorithm::Darc,
        Algorithm::DarcPlus,
        Algorithm::H2o,
        Algorithm::H2oV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::SacMixed => "sac_mixed",
            Algorithm::Cql => "cql",
            Algorithm::Darc => "darc",
            Algorithm::DarcPlus => "darc_plus",
            Algorithm::H2o => "h2o",
            Algorithm::H2oV => "h2o_v",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn uses_sim(self) -> bool {
        self != Algorithm::Cql
    }

    pub fn uses_dataset(self) -> bool {
        self != Algorithm::Sac
    }

    /// Whether real minibatches enter the critic and actor updates.
    pub fn mixes_real_batches(self) -> bool {
        matches!(self, Algorithm::SacMixed | Algorithm::DarcPlus | Algorithm::H2o | Algorithm::H2oV)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub algorithm: Algorithm,
    /// Weight of the gap regularizer in H2O and H2O(v).
    pub beta: f64,
    /// Weight of the CQL regularizer.
    pub alpha_cql: f64,
    pub adaptive_omega: bool,
    pub use_dynamics_ratio: bool,
    pub use_regularization: bool,
    pub delta_r_clip: f64,
    /// Fraction of real states in the actor and temperature batches of mixing variants.
    pub real_fraction: f64,
    /// Gaussian draws per KL estimate.
    pub kl_samples: usize,
    /// Policy and uniform actions per state in the CQL log-sum-exp estimate (each).
    pub cql_num_actions: usize,
    /// Drop the proposal-density correction in the CQL estimate (uniform weights).
    pub cql_uniform_weighting: bool,
    pub discriminator_update_every: u64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            algorithm: Algorithm::H2o,
            beta: 0.01,
            alpha_cql: 2.0,
            adaptive_omega: true,
            use_dynamics_ratio: true,
            use_regularization: true,
            delta_r_clip: 10.0,
            real_fraction: 0.5,
            kl_samples: 10,
            cql_num_actions: 10,
            cql_uniform_weighting: false,
            discriminator_update_every: 1,
        }
    }
}

impl VariantConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        VariantConfig { algorithm, ..Default::default() }
    }

    /// Parses an algorithm name, optionally followed by ablation suffixes for the
    /// H2O family: `-a` (uniform omega), `-dr` (no dynamics ratio), `-reg` (no regularizer).
    /// For example `h2o-reg-dr`.
    pub fn from_variant_name(name: &str) -> Result<Self> {
        let mut parts = name.split('-');
        let base = parts.next().unwrap_or_default().replace("(v)", "_v");
        let algorithm = Algorithm::from_name(&base).ok_or_else(|| Error::Config(format!("unknown variant `{name}`")))?;
        let mut cfg = VariantConfig::new(algorithm);
        for suffix in parts {
            if !matches!(algorithm, Algorithm::H2o | Algorithm::H2oV) {
                return Err(Error::Config(format!("ablation suffixes apply to h2o and h2o_v only, got `{name}`")));
            }
            match suffix {
                "a" => cfg.adaptive_omega = false,
                "dr" => cfg.use_dynamics_ratio = false,
                "reg" => cfg.use_regularization = false,
                other => return Err(Error::Config(format!("unknown ablation suffix `{other}`"))),
            }
        }
        Ok(cfg)
    }

    /// Canonical name, inverse of [`VariantConfig::from_variant_name`] for the ablation flags.
    pub fn variant_name(&self) -> String {
        let mut name = self.algorithm.name().to_string();
        if matches!(self.algorithm, Algorithm::H2o | Algorithm::H2oV) {
            if !self.adaptive_omega {
                name.push_str("-a");
            }
            if !self.use_regularization {
                name.push_str("-reg");
            }
            if !self.use_dynamics_ratio {
                name.push_str("-dr");
            }
        }
        name
    }

    pub fn uses_discriminators(&self) -> bool {
        match self.algorithm {
            Algorithm::Darc | Algorithm::DarcPlus => true,
            Algorithm::H2o | Algorithm::H2oV => self.use_dynamics_ratio || (self.adaptive_omega && self.use_regularization),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.alpha_cql >= 0.0) {
            return Err(Error::Config("beta and alpha_cql must be non-negative".into()));
        }
        if !(self.delta_r_clip > 0.0) {
            return Err(Error::Config("delta_r_clip must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.real_fraction) {
            return Err(Error::Config("real_fraction must lie in [0, 1]".into()));
        }
        if self.kl_samples == 0 || self.cql_num_actions == 0 || self.discriminator_update_every == 0 {
            return Err(Error::Config("kl_samples, cql_num_actions and discriminator_update_every must be positive".into()));
        }
        Ok(())
    }
}

/// Network sizes and optimization settings shared by all variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub discriminator_hidden_units: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub tau: f64,
    pub target_update_period: u64,
    pub initial_log_temperature: f64,
    /// Simulator steps taken with uniform random actions before the policy acts.
    pub random_steps: u64,
    /// Simulator steps collected before the first gradient update.
    pub update_after: u64,
    pub buffer_capacity: usize,
    pub standardize_discriminator_inputs: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden_units: 256,
            hidden_layers: 2,
            discriminator_hidden_units: 256,
            batch_size: 256,
            learning_rate: 3e-4,
            gamma: 0.99,
            tau: 5e-3,
            target_update_period: 1,
            initial_log_temperature: 0.0,
            random_steps: 1000,
            update_after: 1000,
            buffer_capacity: 1_000_000,
            standardize_discriminator_inputs: false,
        }
    }
}

impl AgentConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.learning_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.hidden_layers == 0 || self.discriminator_hidden_units == 0 || self.batch_size == 0 {
            return Err(Error::Config("network sizes and batch_size must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in [0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config("tau must lie in (0, 1]".into()));
        }
        if self.target_update_period == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("target_update_period and buffer_capacity must be positive".into()));
        }
        self.adam().validate()
    }
}
