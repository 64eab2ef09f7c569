//! Critic objectives as explicit per-sample terms, so every variant's loss and its
//! exact gradient come from one evaluator.
//!
//! An objective is a set of critic inputs `x_i` with
//! `loss(Q) = sum_i [ c_i/2 (Q(x_i) - y_i)^2 + l_i Q(x_i) ] + sum_g k_g logsumexp_{i in g}(o_i + Q(x_i))`.
//! Targets, weights and offsets are constants (no gradient flows through them).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::agent::AgentState;
use super::policy::sample_with_noise;
use crate::data::Transition;
use crate::envs::Domain;
use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpParams, Trace};
use crate::scalar::{logsumexp, softmax};

#[derive(Debug, Clone, PartialEq)]
struct Bellman {
    target: f64,
    coef: f64,
    domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
struct Point {
    input: Vec<f64>,
    bellman: Option<Bellman>,
    linear: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct LseGroup {
    scale: f64,
    members: Vec<(usize, f64)>,
}

/// Loss split by source, for term-wise comparisons between variants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CriticLossTerms {
    pub bellman_real: f64,
    pub bellman_sim: f64,
    pub regularizer: f64,
}

impl CriticLossTerms {
    pub fn total(&self) -> f64 {
        self.bellman_real + self.bellman_sim + self.regularizer
    }

    pub fn add(&self, other: &CriticLossTerms) -> CriticLossTerms {
        CriticLossTerms {
            bellman_real: self.bellman_real + other.bellman_real,
            bellman_sim: self.bellman_sim + other.bellman_sim,
            regularizer: self.regularizer + other.regularizer,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CriticObjective {
    points: Vec<Point>,
    groups: Vec<LseGroup>,
}

impl CriticObjective {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Derivative of the loss with respect to each point's Q value, in insertion order.
    pub fn loss_grad_wrt_q(&self, q: &[f64]) -> Vec<f64> {
        let mut dq: Vec<f64> = self
            .points
            .iter()
            .zip(q)
            .map(|(p, &qi)| p.linear + p.bellman.as_ref().map_or(0.0, |b| b.coef * (qi - b.target)))
            .collect();
        for g in &self.groups {
            let z: Vec<f64> = g.members.iter().map(|&(i, o)| o + q[i]).collect();
            for (&(i, _), w) in g.members.iter().zip(softmax(&z)) {
                dq[i] += g.scale * w;
            }
        }
        dq
    }

    /// Concatenated ReLU sign patterns of `critic` over every input this objective evaluates.
    pub fn activation_pattern(&self, critic: &MlpParams<f64>) -> Result<Vec<bool>> {
        let mut out = Vec::new();
        for p in &self.points {
            out.extend(critic.activation_pattern(&p.input)?);
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn add_point(&mut self, input: Vec<f64>) -> usize {
        self.points.push(Point { input, bellman: None, linear: 0.0 });
        self.points.len() - 1
    }

    /// Adds `coef/2 (Q(x) - target)^2` and returns the point index.
    pub fn add_bellman(&mut self, input: Vec<f64>, target: f64, coef: f64, domain: Domain) -> usize {
        let i = self.add_point(input);
        self.points[i].bellman = Some(Bellman { target, coef, domain });
        i
    }

    /// Adds `coef * Q(x_i)`.
    pub fn add_linear(&mut self, i: usize, coef: f64) {
        self.points[i].linear += coef;
    }

    /// Adds `scale * logsumexp_j(offset_j + Q(x_j))` over `(index, offset)` members.
    pub fn add_logsumexp(&mut self, scale: f64, members: Vec<(usize, f64)>) {
        self.groups.push(LseGroup { scale, members });
    }

    pub fn q_values(&self, critic: &MlpParams<f64>) -> Result<Vec<f64>> {
        self.points.iter().map(|p| Ok(critic.forward(&p.input)?[0])).collect()
    }

    fn terms_from_q(&self, q: &[f64]) -> CriticLossTerms {
        let mut t = CriticLossTerms::default();
        for (p, &qi) in self.points.iter().zip(q) {
            if let Some(b) = &p.bellman {
                let e = 0.5 * b.coef * (qi - b.target).powi(2);
                match b.domain {
                    Domain::Real => t.bellman_real += e,
                    Domain::Sim => t.bellman_sim += e,
                }
            }
            t.regularizer += p.linear * qi;
        }
        for g in &self.groups {
            let z: Vec<f64> = g.members.iter().map(|&(i, o)| o + q[i]).collect();
            t.regularizer += g.scale * logsumexp(&z);
        }
        t
    }

    pub fn loss(&self, critic: &MlpParams<f64>) -> Result<CriticLossTerms> {
        Ok(self.terms_from_q(&self.q_values(critic)?))
    }

    /// Loss terms and the exact parameter gradient of their total.
    pub fn loss_and_grad(&self, critic: &MlpParams<f64>) -> Result<(CriticLossTerms, Gradients<f64>)> {
        let (terms, grads, _) = self.loss_grad_q(critic)?;
        Ok((terms, grads))
    }

    /// As [`CriticObjective::loss_and_grad`], also returning `Q` at every point.
    pub fn loss_grad_q(&self, critic: &MlpParams<f64>) -> Result<(CriticLossTerms, Gradients<f64>, Vec<f64>)> {
        let mut traces: Vec<Trace<f64>> = Vec::with_capacity(self.points.len());
        let mut q = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let mut tr = Trace::new();
            critic.forward_trace(&p.input, &mut tr)?;
            q.push(tr.output()[0]);
            traces.push(tr);
        }
        let terms = self.terms_from_q(&q);
        let dq = self.loss_grad_wrt_q(&q);
        let mut grads = Gradients::zeros_like(critic);
        for (tr, d) in traces.iter_mut().zip(dq) {
            if d != 0.0 {
                critic.backward_trace(tr, &[d], &mut grads)?;
            }
        }
        Ok((terms, grads, q))
    }
}

/// Soft Bellman targets `r + gamma (1 - done) (min target Q(s', a') - lambda log pi(a'|s'))`
/// with `a'` drawn using the given standard-normal noise.
pub fn sac_target_with_noise(batch: &[Transition], agent: &AgentState, noise: &[Vec<f64>]) -> Result<Vec<f64>> {
    if noise.len() != batch.len() {
        return Err(Error::rejected("one noise vector per transition is required"));
    }
    let lambda = agent.temperature();
    batch
        .iter()
        .zip(noise)
        .map(|(t, xi)| {
            if t.done || agent.gamma == 0.0 {
                return Ok(t.r);
            }
            let p = sample_with_noise(&agent.actor, &t.s_next, xi, agent.max_action)?;
            let sa = [t.s_next.as_slice(), &p.action].concat();
            let q = agent.target1.forward(&sa)?[0].min(agent.target2.forward(&sa)?[0]);
            Ok(t.r + agent.gamma * (q - lambda * p.log_prob))
        })
        .collect()
}

pub fn standard_noise<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

pub fn sac_target<R: Rng + ?Sized>(batch: &[Transition], agent: &AgentState, rng: &mut R) -> Result<Vec<f64>> {
    let noise = standard_noise(batch.len(), agent.action_dim(), rng);
    sac_target_with_noise(batch, agent, &noise)
}

/// `1/2 mean (Q - y)^2` over one batch.
pub fn sac_objective(batch: &[Transition], targets: &[f64]) -> Result<CriticObjective> {
    let mut obj = CriticObjective::new();
    add_bellman_batch(&mut obj, batch, targets, None)?;
    Ok(obj)
}

fn add_bellman_batch(obj: &mut CriticObjective, batch: &[Transition], targets: &[f64], weights: Option<&[f64]>) -> Result<Vec<usize>> {
    if batch.is_empty() {
        return Err(Error::rejected("critic loss on an empty batch"));
    }
    if targets.len() != batch.len() || weights.is_some_and(|w| w.len() != batch.len()) {
        return Err(Error::rejected("targets and weights must match the batch"));
    }
    let n = batch.len() as f64;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let w = weights.map_or(1.0, |w| w[i]);
            obj.add_bellman(t.state_action(), targets[i], w * w / n, t.domain)
        })
        .collect())
}

/// How the simulated minibatch enters the gap regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerForm {
    /// `log sum_i omega_i exp Q_i`.
    LogSumExp,
    /// `sum_i omega_i Q_i`.
    WeightedMean,
}

/// Inputs to the H2O-family critic objective beyond the two batches.
#[derive(Debug, Clone, PartialEq)]
pub struct GapWeights {
    /// Distribution over the sim batch used by the regularizer.
    pub omega: Vec<f64>,
    /// Importance weights on simulated TD errors.
    pub w: Vec<f64>,
}

/// `beta (reg_sim - mean_real Q) + 1/2 mean_real (Q - y)^2 + 1/2 mean_sim (w (Q - y))^2`.
/// `beta = None` drops the regularizer.
pub fn h2o_objective(
    real: &[Transition],
    y_real: &[f64],
    sim: &[Transition],
    y_sim: &[f64],
    weights: &GapWeights,
    beta: Option<f64>,
    form: RegularizerForm,
) -> Result<CriticObjective> {
    let mut obj = CriticObjective::new();
    let real_idx = add_bellman_batch(&mut obj, real, y_real, None)?;
    let sim_idx = add_bellman_batch(&mut obj, sim, y_sim, Some(&weights.w))?;
    if let Some(beta) = beta {
        if weights.omega.len() != sim.len() {
            return Err(Error::rejected("omega must match the sim batch"));
        }
        let nr = real.len() as f64;
        for &i in &real_idx {
            obj.add_linear(i, -beta / nr);
        }
        match form {
            RegularizerForm::LogSumExp => {
                let members = sim_idx.iter().zip(&weights.omega).map(|(&i, &w)| (i, w.ln())).collect();
                obj.add_logsumexp(beta, members);
            }
            RegularizerForm::WeightedMean => {
                for (&i, &w) in sim_idx.iter().zip(&weights.omega) {
                    obj.add_linear(i, beta * w);
                }
            }
        }
    }
    Ok(obj)
}

/// Sum of the per-source SAC losses on a real and a sim batch.
pub fn mixed_sac_objective(real: &[Transition], y_real: &[f64], sim: &[Transition], y_sim: &[f64]) -> Result<CriticObjective> {
    let mut obj = CriticObjective::new();
    add_bellman_batch(&mut obj, real, y_real, None)?;
    add_bellman_batch(&mut obj, sim, y_sim, None)?;
    Ok(obj)
}

/// Actions scored by the CQL log-sum-exp estimate at one state, with the log
/// proposal density of each (ignored under uniform weighting).
#[derive(Debug, Clone, PartialEq)]
pub struct CqlProposals {
    pub actions: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
}

/// `alpha (mean_s logmeanexp_j(Q(s, a_j) - log q_j) - mean Q(s, a_data)) + 1/2 mean (Q - y)^2`.
pub fn cql_objective(
    batch: &[Transition],
    targets: &[f64],
    proposals: &[CqlProposals],
    alpha: f64,
    uniform_weighting: bool,
) -> Result<CriticObjective> {
    let mut obj = CriticObjective::new();
    let idx = add_bellman_batch(&mut obj, batch, targets, None)?;
    if proposals.len() != batch.len() {
        return Err(Error::rejected("one proposal set per state is required"));
    }
    if alpha == 0.0 {
        return Ok(obj);
    }
    let n = batch.len() as f64;
    for ((t, &i), prop) in batch.iter().zip(&idx).zip(proposals) {
        obj.add_linear(i, -alpha / n);
        let k = prop.actions.len();
        if k == 0 || prop.log_density.len() != k {
            return Err(Error::rejected("proposal actions and densities must be non-empty and aligned"));
        }
        let log_k = (k as f64).ln();
        let members = prop
            .actions
            .iter()
            .zip(&prop.log_density)
            .map(|(a, &lq)| {
                let j = obj.add_point([t.s.as_slice(), a].concat());
                let offset = if uniform_weighting { -log_k } else { -lq - log_k };
                (j, offset)
            })
            .collect();
        obj.add_logsumexp(alpha / n, members);
    }
    Ok(obj)
}

/// `num` current-policy actions and `num` uniform actions per state with their densities.
pub fn cql_proposals<R: Rng + ?Sized>(batch: &[Transition], agent: &AgentState, num: usize, rng: &mut R) -> Result<Vec<CqlProposals>> {
    let d = agent.action_dim();
    let m = agent.max_action;
    let uniform_log_density = -(d as f64) * (2.0 * m).ln();
    batch
        .iter()
        .map(|t| {
            let mut actions = Vec::with_capacity(2 * num);
            let mut log_density = Vec::with_capacity(2 * num);
            for _ in 0..num {
                let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let p = sample_with_noise(&agent.actor, &t.s, &xi, m)?;
                actions.push(p.action);
                log_density.push(p.log_prob);
            }
            for _ in 0..num {
                actions.push((0..d).map(|_| rng.random_range(-m..m)).collect());
                log_density.push(uniform_log_density);
            }
            Ok(CqlProposals { actions, log_density })
        })
        .collect()
}

/// Mean of `q` over the points carrying a Bellman term.
pub fn mean_bellman_q(obj: &CriticObjective, q: &[f64]) -> f64 {
    let vals: Vec<f64> = obj.points.iter().zip(q).filter(|(p, _)| p.bellman.is_some()).map(|(_, &v)| v).collect();
    vals.iter().sum::<f64>() / vals.len().max(1) as f64
}

/// Loss terms and gradients for both online critics; the loss is their sum.
pub fn twin_loss_and_grad(
    obj: &CriticObjective,
    agent: &AgentState,
) -> Result<(CriticLossTerms, Gradients<f64>, Gradients<f64>)> {
    let (t1, g1) = obj.loss_and_grad(&agent.critic1)?;
    let (t2, g2) = obj.loss_and_grad(&agent.critic2)?;
    Ok((t1.add(&t2), g1, g2))
}
