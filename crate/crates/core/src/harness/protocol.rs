use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DatasetProtocol, ProtocolKind};
use super::eval::{evaluate_policy, random_policy_returns};
use crate::agents::{deterministic_action, AgentConfig, Algorithm, EnvSpec, Trainer, VariantConfig};
use crate::data::{collect_dataset, Dataset, Transition, TransitionSource};
use crate::envs::{Domain, Environment, Pendulum, PendulumConfig};
use crate::error::{Error, Result};

/// Dataset plus the reference returns that located the snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub dataset: Dataset,
    pub summary: ProtocolSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub kind: ProtocolKind,
    pub random_return: f64,
    /// Best evaluation return of the SAC run (NaN for the random protocol).
    pub converged_return: f64,
    pub threshold: f64,
    pub snapshot_step: u64,
    pub snapshot_return: f64,
    /// `(step, return)` of every SAC evaluation.
    pub curve: Vec<(u64, f64)>,
    pub transitions: usize,
}

/// Builds an offline dataset in the real pendulum.
///
/// Medium protocols train SAC in the real system, take `converged` as its best evaluation
/// return and snapshot the first evaluation reaching
/// `random + threshold_fraction * (converged - random)`.
pub fn generate_dataset(protocol: &DatasetProtocol, real: &PendulumConfig, agent: &AgentConfig) -> Result<ProtocolOutcome> {
    protocol.validate()?;
    let random_return = random_policy_returns(real, protocol.eval_episodes, protocol.seed)?.mean;
    let max_action = real.max_torque;
    let mut env = Pendulum::new(*real)?;

    if protocol.kind == ProtocolKind::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
        rng.set_stream(3);
        let mut policy = |_: &[f64]| vec![rng.random_range(-max_action..max_action)];
        let dataset = collect_dataset(&mut env, &mut policy, protocol.transitions, 0.0, protocol.seed)?;
        let summary = ProtocolSummary {
            kind: protocol.kind,
            random_return,
            converged_return: f64::NAN,
            threshold: f64::NAN,
            snapshot_step: 0,
            snapshot_return: f64::NAN,
            curve: Vec::new(),
            transitions: dataset.len(),
        };
        return Ok(ProtocolOutcome { dataset, summary });
    }

    let spec = EnvSpec { state_dim: env.observation_dim(), action_dim: env.action_dim(), max_action };
    let agent_cfg = AgentConfig { buffer_capacity: agent.buffer_capacity.max(protocol.sac_steps as usize), ..*agent };
    let sim: Box<dyn Environment + Send> = Box::new(Pendulum::new(*real)?);
    let mut trainer = Trainer::new(VariantConfig::new(Algorithm::Sac), agent_cfg, spec, Some(sim), None, protocol.seed)?;
    let mut snapshots = Vec::new();
    for t in 1..=protocol.sac_steps {
        trainer.train_step()?;
        if t % protocol.eval_every == 0 {
            let ret = evaluate_policy(real, &trainer.agent.actor, protocol.eval_episodes, protocol.seed)?.mean;
            snapshots.push((t, ret, trainer.agent.actor.clone(), trainer.buffer.len()));
        }
    }
    let converged = snapshots.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if !(converged > random_return) {
        return Err(Error::Config(format!(
            "SAC never beat the random policy ({converged:.1} vs {random_return:.1}); raise sac_steps"
        )));
    }
    let threshold = random_return + protocol.threshold_fraction * (converged - random_return);
    let (step, ret, actor, buffer_len) = snapshots.iter().find(|s| s.1 >= threshold).expect("the best snapshot qualifies");

    let dataset = match protocol.kind {
        ProtocolKind::Medium => {
            let mut policy = |s: &[f64]| deterministic_action(actor, s, max_action).expect("actor matches the environment");
            collect_dataset(&mut env, &mut policy, protocol.transitions, protocol.noise_std, protocol.seed)?
        }
        _ => {
            let transitions: Vec<Transition> =
                trainer.buffer.iter().take(*buffer_len).map(|t| Transition { domain: Domain::Real, ..t.clone() }).collect();
            Dataset::new(spec.state_dim, spec.action_dim, transitions)?
        }
    };
    let summary = ProtocolSummary {
        kind: protocol.kind,
        random_return,
        converged_return: converged,
        threshold,
        snapshot_step: *step,
        snapshot_return: *ret,
        curve: snapshots.iter().map(|s| (s.0, s.1)).collect(),
        transitions: dataset.len(),
    };
    Ok(ProtocolOutcome { dataset, summary })
}
