//! Tanh-squashed diagonal Gaussian policy on top of an MLP emitting `(mean, log_std)`.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{MlpParams, Trace};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// `log(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    // 1 - tanh^2 u = 4 / (e^u + e^-u)^2
    2.0 * (LN_2 - u.abs() - (-2.0 * u.abs()).exp().ln_1p())
}

/// One reparameterized draw and everything needed to differentiate through it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub mean: Vec<f64>,
    /// Clamped log standard deviation.
    pub log_std: Vec<f64>,
    /// True where the raw log-std was outside the clamp range (no gradient flows).
    pub clamped: Vec<bool>,
    pub noise: Vec<f64>,
    /// Pre-squash value `mean + std * noise`.
    pub pre_tanh: Vec<f64>,
}

fn split_head(actor: &MlpParams<f64>, out: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    if out.len() % 2 != 0 || actor.output_dim() != out.len() {
        return Err(Error::rejected("actor output must hold a mean and a log-std per action dimension"));
    }
    let d = out.len() / 2;
    let mean = out[..d].to_vec();
    let raw = &out[d..];
    let clamped = raw.iter().map(|&x| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&x)).collect();
    let log_std = raw.iter().map(|&x| x.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    Ok((mean, log_std, clamped))
}

/// Action and log-density for given standard-normal `noise`.
pub fn sample_with_noise(actor: &MlpParams<f64>, s: &[f64], noise: &[f64], max_action: f64) -> Result<PolicySample> {
    let mut trace = Trace::new();
    sample_traced(actor, s, noise, max_action, &mut trace)
}

pub(crate) fn sample_traced(
    actor: &MlpParams<f64>,
    s: &[f64],
    noise: &[f64],
    max_action: f64,
    trace: &mut Trace<f64>,
) -> Result<PolicySample> {
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::rejected("non-finite state"));
    }
    actor.forward_trace(s, trace)?;
    let (mean, log_std, clamped) = split_head(actor, trace.output())?;
    if noise.len() != mean.len() {
        return Err(Error::rejected("noise dimension does not match the action dimension"));
    }
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut action = Vec::with_capacity(mean.len());
    let mut pre_tanh = Vec::with_capacity(mean.len());
    let mut log_prob = 0.0;
    for j in 0..mean.len() {
        let u = mean[j] + log_std[j].exp() * noise[j];
        action.push(max_action * u.tanh());
        pre_tanh.push(u);
        log_prob += -0.5 * noise[j] * noise[j] - log_std[j] - half_log_2pi - log_one_minus_tanh_sq(u) - max_action.ln();
    }
    Ok(PolicySample { action, log_prob, mean, log_std, clamped, noise: noise.to_vec(), pre_tanh })
}

/// Stochastic action `max_action * tanh(mean + std * xi)` and its log-density.
pub fn policy_sample<R: Rng + ?Sized>(actor: &MlpParams<f64>, s: &[f64], max_action: f64, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    let d = actor.output_dim() / 2;
    let noise: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let p = sample_with_noise(actor, s, &noise, max_action)?;
    Ok((p.action, p.log_prob))
}

/// `max_action * tanh(mean)`.
pub fn deterministic_action(actor: &MlpParams<f64>, s: &[f64], max_action: f64) -> Result<Vec<f64>> {
    let out = actor.forward(s)?;
    let (mean, _, _) = split_head(actor, &out)?;
    Ok(mean.into_iter().map(|m| max_action * m.tanh()).collect())
}

/// Log-density of an arbitrary action in `(-max_action, max_action)^d`.
pub fn log_prob_of(actor: &MlpParams<f64>, s: &[f64], action: &[f64], max_action: f64) -> Result<f64> {
    let out = actor.forward(s)?;
    let (mean, log_std, _) = split_head(actor, &out)?;
    if action.len() != mean.len() {
        return Err(Error::rejected("action dimension mismatch"));
    }
    let mut lp = 0.0;
    for j in 0..mean.len() {
        let y = (action[j] / max_action).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        let u = y.atanh();
        let z = (u - mean[j]) / log_std[j].exp();
        lp += -0.5 * z * z - log_std[j] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(u) - max_action.ln();
    }
    Ok(lp)
}
