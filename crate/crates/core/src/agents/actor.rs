use super::agent::AgentState;
use super::policy::{sample_traced, sample_with_noise};
use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpParams, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: Gradients<f64>,
    pub mean_log_prob: f64,
}

/// `mean_i (lambda log pi(a_i|s_i) - min(Q1, Q2)(s_i, a_i))` with `a_i` reparameterized by
/// `noise[i]`, and its gradient with respect to the actor parameters only.
pub fn actor_loss_and_grad(
    actor: &MlpParams<f64>,
    states: &[Vec<f64>],
    noise: &[Vec<f64>],
    critic1: &MlpParams<f64>,
    critic2: &MlpParams<f64>,
    lambda: f64,
    max_action: f64,
) -> Result<ActorLoss> {
    if states.is_empty() || noise.len() != states.len() {
        return Err(Error::rejected("actor loss needs a non-empty batch with one noise vector per state"));
    }
    let n = states.len() as f64;
    let mut grads = Gradients::zeros_like(actor);
    let mut actor_trace = Trace::new();
    let (mut c1_trace, mut c2_trace) = (Trace::new(), Trace::new());
    let mut c_grads = Gradients::zeros_like(critic1);
    let (mut loss, mut total_lp) = (0.0, 0.0);
    for (s, xi) in states.iter().zip(noise) {
        let p = sample_traced(actor, s, xi, max_action, &mut actor_trace)?;
        let sa = [s.as_slice(), &p.action].concat();
        critic1.forward_trace(&sa, &mut c1_trace)?;
        critic2.forward_trace(&sa, &mut c2_trace)?;
        let (q1, q2) = (c1_trace.output()[0], c2_trace.output()[0]);
        loss += (lambda * p.log_prob - q1.min(q2)) / n;
        total_lp += p.log_prob;

        // dQ/d(input) from the smaller critic; its parameter gradient is discarded.
        let input_grad = if q1 <= q2 {
            critic1.backward_trace(&mut c1_trace, &[1.0], &mut c_grads)?
        } else {
            critic2.backward_trace(&mut c2_trace, &[1.0], &mut c_grads)?
        };
        let dq_da = &input_grad[s.len()..];
        let d = p.mean.len();
        let mut upstream = vec![0.0; 2 * d];
        for j in 0..d {
            let t = p.pre_tanh[j].tanh();
            let sigma = p.log_std[j].exp();
            let da_du = max_action * (1.0 - t * t);
            // d(log pi)/du = 2 tanh(u) through the squashing correction.
            let dl_du = lambda * 2.0 * t - dq_da[j] * da_du;
            upstream[j] = dl_du / n;
            if !p.clamped[j] {
                upstream[d + j] = (-lambda + dl_du * sigma * xi[j]) / n;
            }
        }
        actor.backward_trace(&mut actor_trace, &upstream, &mut grads)?;
    }
    Ok(ActorLoss { loss, grads, mean_log_prob: total_lp / n })
}

pub fn actor_loss(agent: &AgentState, states: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<ActorLoss> {
    actor_loss_and_grad(&agent.actor, states, noise, &agent.critic1, &agent.critic2, agent.temperature(), agent.max_action)
}

/// Log-probabilities of fresh reparameterized draws.
pub fn log_probs(actor: &MlpParams<f64>, states: &[Vec<f64>], noise: &[Vec<f64>], max_action: f64) -> Result<Vec<f64>> {
    states.iter().zip(noise).map(|(s, xi)| Ok(sample_with_noise(actor, s, xi, max_action)?.log_prob)).collect()
}

/// Gradient of `lambda * mean(-log pi - target_entropy)` with respect to `log lambda`.
pub fn temperature_gradient(log_temperature: f64, log_probs: &[f64], target_entropy: f64) -> f64 {
    let mean: f64 = log_probs.iter().map(|lp| -lp - target_entropy).sum::<f64>() / log_probs.len() as f64;
    log_temperature.exp() * mean
}

/// One Adam step on the log-temperature. Returns the temperature loss before the step.
pub fn temperature_update(agent: &mut AgentState, log_probs: &[f64]) -> Result<f64> {
    if log_probs.is_empty() {
        return Err(Error::rejected("temperature update needs at least one sample"));
    }
    // The loss is lambda * m, so its derivative in log lambda equals the loss itself.
    let g = temperature_gradient(agent.log_temperature, log_probs, agent.target_entropy);
    agent.adam_temperature.step(&mut agent.log_temperature, g)?;
    Ok(g)
}
