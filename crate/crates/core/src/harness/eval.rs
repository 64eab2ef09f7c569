use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{deterministic_action, stream_rng, EVAL_STREAM};
use crate::data::{StateCovariance, Transition};
use crate::envs::{Environment, Pendulum, PendulumConfig};
use crate::error::{Error, Result};
use crate::gap::{gap_measure_u, DynamicsRatio};
use crate::nn::MlpParams;

/// Mean and population standard deviation of undiscounted episode returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl ReturnStats {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        ReturnStats { mean, std: var.sqrt(), returns }
    }
}

/// Full episodes of `policy` in `env`; the policy gets the eval RNG for any sampling it does.
pub fn rollout_returns(
    env: &mut dyn Environment,
    policy: &mut dyn FnMut(&[f64], &mut ChaCha8Rng) -> Result<Vec<f64>>,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ReturnStats> {
    if episodes == 0 {
        return Err(Error::rejected("episodes must be positive"));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let a = policy(&obs, rng)?;
            let out = env.step(&a, rng)?;
            total += out.reward;
            if out.terminal || out.truncated {
                break;
            }
            obs = out.observation;
        }
        returns.push(total);
    }
    Ok(ReturnStats::from_returns(returns))
}

/// Deterministic (mean) actions of `actor` in a fresh real pendulum, on the eval stream of `seed`.
pub fn evaluate_policy(real: &PendulumConfig, actor: &MlpParams<f64>, episodes: usize, seed: u64) -> Result<ReturnStats> {
    let mut env = Pendulum::new(*real)?;
    let max_action = real.max_torque;
    let mut rng = stream_rng(seed, EVAL_STREAM);
    rollout_returns(&mut env, &mut |s, _| deterministic_action(actor, s, max_action), episodes, &mut rng)
}

/// Uniform random torques in the real pendulum.
pub fn random_policy_returns(real: &PendulumConfig, episodes: usize, seed: u64) -> Result<ReturnStats> {
    let mut env = Pendulum::new(*real)?;
    let m = real.max_torque;
    let mut rng = stream_rng(seed, EVAL_STREAM);
    rollout_returns(&mut env, &mut |_, r| Ok(vec![r.random_range(-m..m)]), episodes, &mut rng)
}

/// One probe of the gap diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub feature: f64,
    pub u: f64,
    pub q: f64,
}

/// Pendulum angular speed `|theta_dot|` of the transition's start state.
pub fn angular_speed(t: &Transition) -> f64 {
    t.s[2].abs()
}

/// `(feature, u, min Q)` for every probe transition.
#[allow(clippy::too_many_arguments)]
pub fn gap_diagnostic<R: Rng + ?Sized>(
    critics: (&MlpParams<f64>, &MlpParams<f64>),
    ratio: &dyn DynamicsRatio,
    cov: &StateCovariance,
    probe: &[Transition],
    kl_samples: usize,
    feature: fn(&Transition) -> f64,
    rng: &mut R,
) -> Result<Vec<DiagnosticRow>> {
    probe
        .iter()
        .map(|t| {
            let u = gap_measure_u(ratio, &t.s, &t.a, &t.s_next, cov, kl_samples, rng)?;
            let sa = t.state_action();
            let q = critics.0.forward(&sa)?[0].min(critics.1.forward(&sa)?[0]);
            Ok(DiagnosticRow { feature: feature(t), u, q })
        })
        .collect()
}

/// Mean `u` over the bottom and top quartiles of the feature.
pub fn quartile_u_means(rows: &[DiagnosticRow]) -> Result<(f64, f64)> {
    if rows.len() < 4 {
        return Err(Error::rejected("need at least four probes for quartiles"));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.feature.total_cmp(&b.feature));
    let k = rows.len() / 4;
    let mean = |r: &[DiagnosticRow]| r.iter().map(|x| x.u).sum::<f64>() / r.len() as f64;
    Ok((mean(&sorted[..k]), mean(&sorted[rows.len() - k..])))
}
