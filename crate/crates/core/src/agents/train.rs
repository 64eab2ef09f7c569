//! The per-step training contract shared by every variant.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::actor::{actor_loss, log_probs, temperature_update};
use super::agent::AgentState;
use super::config::{AgentConfig, Algorithm, VariantConfig};
use super::critic::*;
use super::policy::policy_sample;
use crate::data::{sample_batch, state_covariance, Dataset, ReplayBuffer, StateCovariance, Transition};
use crate::envs::{Domain, Environment};
use crate::error::{Error, Result};
use crate::gap::{
    entropy, importance_weight, DiscriminatorPair, DynamicsRatio, GapEstimate, Standardizer,
};
use crate::nn::adam_step;
use crate::scalar::logsumexp;

/// Named RNG streams derived from one master seed.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub init: ChaCha8Rng,
    pub env: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    pub batch: ChaCha8Rng,
    pub discriminator: ChaCha8Rng,
}

pub const EVAL_STREAM: u64 = 5;

/// `ChaCha8` keyed by `seed` on stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        RngStreams {
            init: stream_rng(seed, 0),
            env: stream_rng(seed, 1),
            policy: stream_rng(seed, 2),
            batch: stream_rng(seed, 3),
            discriminator: stream_rng(seed, 4),
        }
    }
}

/// Shapes of the control problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub max_action: f64,
}

/// What one call to [`Trainer::train_step`] did. Losses are NaN before updates start
/// and gap statistics are NaN when the variant does not compute them.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub updated: bool,
    pub critic_loss: f64,
    pub critic_terms: CriticLossTerms,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub temperature: f64,
    pub mean_q: f64,
    pub mean_u: f64,
    pub mean_w: f64,
    pub omega_entropy: f64,
    /// `logsumexp(log omega + Q) - sum omega Q` on the sim batch; never negative.
    pub omega_jensen_gap: f64,
    pub disc_loss_sas: f64,
    pub disc_loss_sa: f64,
    pub real_reads: u64,
    pub sim_env_steps: u64,
}

impl StepMetrics {
    fn empty(step: u64) -> Self {
        StepMetrics {
            step,
            updated: false,
            critic_loss: f64::NAN,
            critic_terms: CriticLossTerms::default(),
            actor_loss: f64::NAN,
            temperature_loss: f64::NAN,
            temperature: f64::NAN,
            mean_q: f64::NAN,
            mean_u: f64::NAN,
            mean_w: f64::NAN,
            omega_entropy: f64::NAN,
            omega_jensen_gap: f64::NAN,
            disc_loss_sas: f64::NAN,
            disc_loss_sa: f64::NAN,
            real_reads: 0,
            sim_env_steps: 0,
        }
    }
}

pub struct Trainer {
    pub agent: AgentState,
    pub variant: VariantConfig,
    pub config: AgentConfig,
    pub spec: EnvSpec,
    env_sim: Option<Box<dyn Environment + Send>>,
    dataset: Option<Arc<Dataset>>,
    pub buffer: ReplayBuffer,
    pub pair: Option<DiscriminatorPair>,
    cov: Option<StateCovariance>,
    rngs: RngStreams,
    obs: Vec<f64>,
    episode_return: f64,
    pub sim_episode_returns: Vec<f64>,
    pub step: u64,
    pub real_reads: u64,
    pub sim_env_steps: u64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl Trainer {
    pub fn new(
        variant: VariantConfig,
        config: AgentConfig,
        spec: EnvSpec,
        env_sim: Option<Box<dyn Environment + Send>>,
        dataset: Option<Arc<Dataset>>,
        seed: u64,
    ) -> Result<Self> {
        variant.validate()?;
        config.validate()?;
        let alg = variant.algorithm;
        if alg.uses_sim() && env_sim.is_none() {
            return Err(Error::Config(format!("{} needs a simulator", alg.name())));
        }
        if alg.uses_dataset() && dataset.as_ref().is_none_or(|d| d.is_empty()) {
            return Err(Error::Config(format!("{} needs a non-empty offline dataset", alg.name())));
        }
        if let Some(d) = &dataset {
            if d.state_dim != spec.state_dim || d.action_dim != spec.action_dim {
                return Err(Error::Config("dataset dimensions do not match the environment".into()));
            }
        }
        let mut rngs = RngStreams::from_seed(seed);
        let agent = AgentState::new(spec.state_dim, spec.action_dim, spec.max_action, &config, &mut rngs.init)?;
        let pair = if variant.uses_discriminators() {
            let mut p = DiscriminatorPair::new(
                spec.state_dim,
                spec.action_dim,
                config.discriminator_hidden_units,
                config.adam(),
                &mut rngs.init,
            )?;
            if config.standardize_discriminator_inputs {
                p.standardizer = Some(Standardizer::fit(&dataset.as_ref().expect("checked above").transitions)?);
            }
            Some(p)
        } else {
            None
        };
        let cov = match (&dataset, matches!(alg, Algorithm::H2o | Algorithm::H2oV)) {
            (Some(d), true) => Some(state_covariance(d.as_ref())?),
            _ => None,
        };
        let mut env_sim = env_sim;
        let obs = match env_sim.as_mut() {
            Some(env) => env.reset(&mut rngs.env),
            None => Vec::new(),
        };
        Ok(Trainer {
            agent,
            variant,
            config,
            spec,
            env_sim: if alg.uses_sim() { env_sim } else { None },
            dataset: if alg.uses_dataset() { dataset } else { None },
            buffer: ReplayBuffer::new(config.buffer_capacity),
            pair,
            cov,
            rngs,
            obs,
            episode_return: 0.0,
            sim_episode_returns: Vec::new(),
            step: 0,
            real_reads: 0,
            sim_env_steps: 0,
        })
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.dataset.as_deref()
    }

    pub fn covariance(&self) -> Option<&StateCovariance> {
        self.cov.as_ref()
    }

    fn sim_env_step(&mut self) -> Result<()> {
        let env = self.env_sim.as_mut().expect("variant uses the simulator");
        let m = self.spec.max_action;
        let action: Vec<f64> = if self.sim_env_steps < self.config.random_steps {
            (0..self.spec.action_dim).map(|_| self.rngs.policy.random_range(-m..m)).collect()
        } else {
            policy_sample(&self.agent.actor, &self.obs, m, &mut self.rngs.policy)?.0
        };
        let out = env.step(&action, &mut self.rngs.env)?;
        self.sim_env_steps += 1;
        self.episode_return += out.reward;
        let s = std::mem::take(&mut self.obs);
        self.buffer.push(Transition {
            s,
            a: action,
            r: out.reward,
            s_next: out.observation.clone(),
            done: out.terminal,
            domain: Domain::Sim,
        });
        if out.terminal || out.truncated {
            self.sim_episode_returns.push(self.episode_return);
            self.episode_return = 0.0;
            self.obs = env.reset(&mut self.rngs.env);
        } else {
            self.obs = out.observation;
        }
        Ok(())
    }

    fn real_batch(&mut self, rng_is_disc: bool) -> Result<Vec<Transition>> {
        let d = self.dataset.as_deref().expect("variant uses the dataset");
        self.real_reads += self.config.batch_size as u64;
        let rng = if rng_is_disc { &mut self.rngs.discriminator } else { &mut self.rngs.batch };
        sample_batch(d, self.config.batch_size, rng)
    }

    fn non_finite(&self, what: &'static str, m: &StepMetrics) -> Error {
        Error::NonFinite { what, step: self.step, detail: format!("{m:?}") }
    }

    /// One iteration: simulator step, discriminator update, critic, actor,
    /// temperature, target update.
    pub fn train_step(&mut self) -> Result<StepMetrics> {
        self.step += 1;
        let mut m = StepMetrics::empty(self.step);
        let alg = self.variant.algorithm;
        if alg.uses_sim() {
            self.sim_env_step()?;
        }
        let ready = !alg.uses_sim() || self.sim_env_steps >= self.config.update_after.max(1);
        if !ready {
            m.real_reads = self.real_reads;
            m.sim_env_steps = self.sim_env_steps;
            return Ok(m);
        }
        let b = self.config.batch_size;

        let mut sim = if alg.uses_sim() { sample_batch(&self.buffer, b, &mut self.rngs.batch)? } else { Vec::new() };
        let real = if alg == Algorithm::Cql || alg.mixes_real_batches() { self.real_batch(false)? } else { Vec::new() };

        if self.pair.is_some() && self.step % self.variant.discriminator_update_every == 0 {
            let d_real = self.real_batch(true)?;
            let d_sim = sample_batch(&self.buffer, b, &mut self.rngs.discriminator)?;
            let (ls, la) = self.pair.as_mut().expect("checked").train_step(&d_real, &d_sim)?;
            m.disc_loss_sas = ls;
            m.disc_loss_sa = la;
        }

        if matches!(alg, Algorithm::Darc | Algorithm::DarcPlus) {
            let pair = self.pair.as_ref().expect("darc uses discriminators");
            let clip = self.variant.delta_r_clip;
            for t in sim.iter_mut() {
                let log_ratio = pair.log_ratio_sim_over_real(&t.s, &t.a, &t.s_next)?;
                t.r += (-log_ratio).clamp(-clip, clip);
            }
        }

        let y_sim = if sim.is_empty() { Vec::new() } else { sac_target(&sim, &self.agent, &mut self.rngs.policy)? };
        let y_real = if real.is_empty() { Vec::new() } else { sac_target(&real, &self.agent, &mut self.rngs.policy)? };

        let objective = match alg {
            Algorithm::Sac | Algorithm::Darc => sac_objective(&sim, &y_sim)?,
            Algorithm::SacMixed | Algorithm::DarcPlus => mixed_sac_objective(&real, &y_real, &sim, &y_sim)?,
            Algorithm::Cql => {
                let props = cql_proposals(&real, &self.agent, self.variant.cql_num_actions, &mut self.rngs.policy)?;
                cql_objective(&real, &y_real, &props, self.variant.alpha_cql, self.variant.cql_uniform_weighting)?
            }
            Algorithm::H2o | Algorithm::H2oV => {
                let weights = self.gap_weights(&sim, &mut m)?;
                let form = if alg == Algorithm::H2o { RegularizerForm::LogSumExp } else { RegularizerForm::WeightedMean };
                let beta = self.variant.use_regularization.then_some(self.variant.beta);
                let obj = h2o_objective(&real, &y_real, &sim, &y_sim, &weights, beta, form)?;
                if beta.is_some() {
                    let q: Vec<f64> = sim
                        .iter()
                        .map(|t| Ok(self.agent.critic1.forward(&t.state_action())?[0]))
                        .collect::<Result<_>>()?;
                    let z: Vec<f64> = q.iter().zip(&weights.omega).map(|(q, w)| w.ln() + q).collect();
                    let wq: f64 = q.iter().zip(&weights.omega).map(|(q, w)| w * q).sum();
                    m.omega_jensen_gap = logsumexp(&z) - wq;
                }
                obj
            }
        };

        let (terms, g1, q1) = objective.loss_grad_q(&self.agent.critic1)?;
        let (terms2, g2) = objective.loss_and_grad(&self.agent.critic2)?;
        m.critic_terms = terms.add(&terms2);
        m.critic_loss = m.critic_terms.total();
        m.mean_q = mean_bellman_q(&objective, &q1);
        if !m.critic_loss.is_finite() {
            return Err(self.non_finite("critic loss", &m));
        }
        adam_step(&mut self.agent.critic1, &g1, &mut self.agent.adam_critic1)?;
        adam_step(&mut self.agent.critic2, &g2, &mut self.agent.adam_critic2)?;

        let states = self.actor_states(&real, &sim);
        let noise = standard_noise(states.len(), self.spec.action_dim, &mut self.rngs.policy);
        let a = actor_loss(&self.agent, &states, &noise)?;
        m.actor_loss = a.loss;
        if !a.loss.is_finite() {
            return Err(self.non_finite("actor loss", &m));
        }
        adam_step(&mut self.agent.actor, &a.grads, &mut self.agent.adam_actor)?;

        let noise = standard_noise(states.len(), self.spec.action_dim, &mut self.rngs.policy);
        let lps = log_probs(&self.agent.actor, &states, &noise, self.spec.max_action)?;
        m.temperature_loss = temperature_update(&mut self.agent, &lps)?;
        m.temperature = self.agent.temperature();

        self.agent.updates += 1;
        if self.agent.updates % self.agent.target_update_period == 0 {
            self.agent.soft_update_targets();
        }
        m.updated = true;
        m.real_reads = self.real_reads;
        m.sim_env_steps = self.sim_env_steps;
        Ok(m)
    }

    fn gap_weights(&mut self, sim: &[Transition], m: &mut StepMetrics) -> Result<GapWeights> {
        let n = sim.len();
        let w = if self.variant.use_dynamics_ratio {
            let pair = self.pair.as_ref().expect("dynamics ratio needs discriminators");
            sim.iter().map(|t| importance_weight(pair, &t.s, &t.a, &t.s_next)).collect::<Result<Vec<_>>>()?
        } else {
            vec![1.0; n]
        };
        m.mean_w = mean(&w);
        let omega = if self.variant.use_regularization && self.variant.adaptive_omega {
            let pair = self.pair.as_ref().expect("adaptive omega needs discriminators");
            let cov = self.cov.as_ref().expect("h2o computes the state covariance");
            let est = GapEstimate::for_batch(pair, sim, cov, self.variant.kl_samples, &mut self.rngs.discriminator)?;
            m.mean_u = mean(&est.u);
            est.omega
        } else {
            vec![1.0 / n as f64; n]
        };
        m.omega_entropy = entropy(&omega);
        Ok(GapWeights { omega, w })
    }

    fn actor_states(&self, real: &[Transition], sim: &[Transition]) -> Vec<Vec<f64>> {
        let alg = self.variant.algorithm;
        if alg == Algorithm::Cql {
            return real.iter().map(|t| t.s.clone()).collect();
        }
        if !alg.mixes_real_batches() {
            return sim.iter().map(|t| t.s.clone()).collect();
        }
        let b = self.config.batch_size;
        let n_real = ((self.variant.real_fraction * b as f64).round() as usize).min(real.len());
        let n_sim = (b - n_real).min(sim.len());
        real[..n_real].iter().chain(&sim[..n_sim]).map(|t| t.s.clone()).collect()
    }
}
