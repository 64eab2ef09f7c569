use rand::Rng;

use super::config::AgentConfig;
use crate::error::Result;
use crate::nn::{AdamState, HiddenActivation, MlpParams, OutputActivation, ScalarAdam};

/// Actor, twin critics with trailing targets, log-temperature and their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub actor: MlpParams<f64>,
    pub critic1: MlpParams<f64>,
    pub critic2: MlpParams<f64>,
    pub target1: MlpParams<f64>,
    pub target2: MlpParams<f64>,
    pub log_temperature: f64,
    pub adam_actor: AdamState<f64>,
    pub adam_critic1: AdamState<f64>,
    pub adam_critic2: AdamState<f64>,
    pub adam_temperature: ScalarAdam<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub target_update_period: u64,
    pub max_action: f64,
    pub target_entropy: f64,
    /// Completed critic updates; drives the target-update schedule.
    pub updates: u64,
}

fn layers(input: usize, hidden: usize, depth: usize, output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend(std::iter::repeat_n(hidden, depth));
    v.push(output);
    v
}

impl AgentState {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, max_action: f64, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (h, d) = (cfg.hidden_units, cfg.hidden_layers);
        let actor = MlpParams::init(&layers(state_dim, h, d, 2 * action_dim), HiddenActivation::Relu, OutputActivation::Identity, rng)?;
        let critic_shape = layers(state_dim + action_dim, h, d, 1);
        let critic1 = MlpParams::init(&critic_shape, HiddenActivation::Relu, OutputActivation::Identity, rng)?;
        let critic2 = MlpParams::init(&critic_shape, HiddenActivation::Relu, OutputActivation::Identity, rng)?;
        let adam = cfg.adam();
        Ok(AgentState {
            adam_actor: AdamState::new(&actor, adam),
            adam_critic1: AdamState::new(&critic1, adam),
            adam_critic2: AdamState::new(&critic2, adam),
            adam_temperature: ScalarAdam::new(adam),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_temperature: cfg.initial_log_temperature,
            gamma: cfg.gamma,
            tau: cfg.tau,
            target_update_period: cfg.target_update_period,
            max_action,
            target_entropy: -(action_dim as f64),
            updates: 0,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn state_dim(&self) -> usize {
        self.critic1.input_dim() - self.action_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    /// `min(Q1, Q2)(s, a)` from the online critics.
    pub fn q_min(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let sa = [s, a].concat();
        Ok(self.critic1.forward(&sa)?[0].min(self.critic2.forward(&sa)?[0]))
    }

    /// `target <- (1 - tau) target + tau critic` for both critics.
    pub fn soft_update_targets(&mut self) {
        self.target1.soft_update_from(&self.critic1, self.tau);
        self.target2.soft_update_from(&self.critic2, self.tau);
    }
}
