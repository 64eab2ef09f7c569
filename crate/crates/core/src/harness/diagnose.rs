use super::config::ExperimentConfig;
use super::eval::{angular_speed, gap_diagnostic, DiagnosticRow};
use crate::agents::{policy_sample, stream_rng, Checkpoint};
use crate::data::{state_covariance, Dataset, Transition};
use crate::envs::{Domain, Environment, Pendulum};
use crate::error::{Error, Result};
use crate::gap::{DiscriminatorPair, Standardizer};
use crate::nn::MlpParams;

pub const PROBE_STREAM: u64 = 7;
pub const DIAGNOSTIC_STREAM: u64 = 6;

/// `n` simulator transitions generated by sampling from `actor`.
pub fn simulator_probes(cfg: &ExperimentConfig, actor: &MlpParams<f64>, n: usize) -> Result<Vec<Transition>> {
    let mut env = Pendulum::new(cfg.env.sim())?;
    let mut rng = stream_rng(cfg.seed, PROBE_STREAM);
    let m = env.action_bound();
    let mut obs = env.reset(&mut rng);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (a, _) = policy_sample(actor, &obs, m, &mut rng)?;
        let step = env.step(&a, &mut rng)?;
        out.push(Transition { s: obs, a, r: step.reward, s_next: step.observation.clone(), done: step.terminal, domain: Domain::Sim });
        obs = if step.terminal || step.truncated { env.reset(&mut rng) } else { step.observation };
    }
    Ok(out)
}

/// Rebuilds the discriminator pair of a checkpoint, with the input standardizer
/// refit on `dataset` when the config uses one.
pub fn checkpoint_discriminators(cfg: &ExperimentConfig, ck: &Checkpoint, dataset: &Dataset) -> Result<DiscriminatorPair> {
    let (Some(d_sa), Some(d_sas)) = (ck.d_sa.clone(), ck.d_sas.clone()) else {
        return Err(Error::rejected("checkpoint has no discriminators"));
    };
    let mut pair = DiscriminatorPair::from_networks(d_sa, d_sas, dataset.state_dim, dataset.action_dim, cfg.agent.adam());
    if cfg.agent.standardize_discriminator_inputs {
        pair.standardizer = Some(Standardizer::fit(&dataset.transitions)?);
    }
    Ok(pair)
}

/// Gap measure and critic value against angular speed on `probes` simulator transitions.
pub fn diagnose_checkpoint(cfg: &ExperimentConfig, ck: &Checkpoint, dataset: &Dataset, probes: usize) -> Result<Vec<DiagnosticRow>> {
    let pair = checkpoint_discriminators(cfg, ck, dataset)?;
    let cov = state_covariance(dataset)?;
    let probe = simulator_probes(cfg, &ck.actor, probes)?;
    let mut rng = stream_rng(cfg.seed, DIAGNOSTIC_STREAM);
    gap_diagnostic((&ck.critic1, &ck.critic2), &pair, &cov, &probe, cfg.variant.kl_samples, angular_speed, &mut rng)
}
