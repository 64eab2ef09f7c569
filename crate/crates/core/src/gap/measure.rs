use rand::Rng;

use super::discriminator::DiscriminatorPair;
use crate::data::{cholesky, StateCovariance, Transition};
use crate::error::{Error, Result};

pub const U_MIN: f64 = 1e-45;
pub const U_MAX: f64 = 10.0;
pub const WEIGHT_MIN: f64 = 1e-5;
pub const WEIGHT_MAX: f64 = 1.0;
pub const DELTA_R_CLIP: f64 = 10.0;
pub const DEFAULT_KL_SAMPLES: usize = 10;

/// Anything that can report `log [P_sim(s'|s,a) / P_real(s'|s,a)]`.
pub trait DynamicsRatio {
    fn log_ratio_sim_over_real(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64>;
}

impl DynamicsRatio for DiscriminatorPair {
    fn log_ratio_sim_over_real(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
        self.log_ratio(s, a, s_next)
    }
}

/// Sim/real dynamics ratio from the two heads' "real" probabilities.
pub fn ratio_from_probs(p_real_sas: f64, p_real_sa: f64) -> f64 {
    ((1.0 - p_real_sas) / p_real_sas) / ((1.0 - p_real_sa) / p_real_sa)
}

pub fn dynamics_ratio<M: DynamicsRatio + ?Sized>(model: &M, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
    Ok(model.log_ratio_sim_over_real(s, a, s_next)?.exp())
}

/// Real/sim weight for a simulated TD error, clipped to `[1e-5, 1]`.
pub fn importance_weight_from_log_ratio(log_ratio_sim_over_real: f64) -> f64 {
    (-log_ratio_sim_over_real).exp().clamp(WEIGHT_MIN, WEIGHT_MAX)
}

pub fn importance_weight<M: DynamicsRatio + ?Sized>(model: &M, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
    Ok(importance_weight_from_log_ratio(model.log_ratio_sim_over_real(s, a, s_next)?))
}

/// Reward correction `-log(sim/real)`, clipped to `[-10, 10]`.
pub fn darc_reward_correction<M: DynamicsRatio + ?Sized>(model: &M, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
    Ok((-model.log_ratio_sim_over_real(s, a, s_next)?).clamp(-DELTA_R_CLIP, DELTA_R_CLIP))
}

pub fn clip_u(u: f64) -> f64 {
    u.clamp(U_MIN, U_MAX)
}

/// Monte Carlo KL estimate: sum of log sim/real ratios at `n` draws from
/// `Normal(s_next, regularized_cov)`, clipped to `[1e-45, 10]`.
pub fn gap_measure_u<M, R>(
    model: &M,
    s: &[f64],
    a: &[f64],
    s_next: &[f64],
    cov: &StateCovariance,
    n: usize,
    rng: &mut R,
) -> Result<f64>
where
    M: DynamicsRatio + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::rejected("need at least one KL sample"));
    }
    if s_next.len() != cov.dim() {
        return Err(Error::rejected("covariance dimension does not match the state"));
    }
    let mut total = 0.0;
    for _ in 0..n {
        let draw = cov.sample_around(s_next, rng);
        total += model.log_ratio_sim_over_real(s, a, &draw)?;
    }
    Ok(clip_u(total))
}

/// `u_i / sum_j u_j`.
pub fn batch_omega(u: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() {
        return Err(Error::rejected("omega of an empty batch"));
    }
    if u.iter().any(|&x| !(x >= U_MIN) || !x.is_finite()) {
        return Err(Error::rejected("u values must be finite and at least the clip floor"));
    }
    let z: f64 = u.iter().sum();
    Ok(u.iter().map(|x| x / z).collect())
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Per-sample gap measure and the normalized minibatch distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    pub u: Vec<f64>,
    pub omega: Vec<f64>,
}

impl GapEstimate {
    pub fn for_batch<M, R>(model: &M, batch: &[Transition], cov: &StateCovariance, n: usize, rng: &mut R) -> Result<Self>
    where
        M: DynamicsRatio + ?Sized,
        R: Rng + ?Sized,
    {
        let u = batch
            .iter()
            .map(|t| gap_measure_u(model, &t.s, &t.a, &t.s_next, cov, n, rng))
            .collect::<Result<Vec<_>>>()?;
        let omega = batch_omega(&u)?;
        Ok(GapEstimate { u, omega })
    }
}

/// Forward model `s' ~ Normal(W [s, a, 1], diag(var))` fitted by ridge least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDynamicsModel {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Row-major `(|s| + |a| + 1) x |s|`; empty until fitted.
    pub weights: Vec<f64>,
    pub variance: Vec<f64>,
}

fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * d + i];
    }
    x
}

impl GaussianDynamicsModel {
    pub fn unfitted(state_dim: usize, action_dim: usize) -> Self {
        GaussianDynamicsModel { state_dim, action_dim, weights: Vec::new(), variance: Vec::new() }
    }

    pub fn is_fitted(&self) -> bool {
        !self.weights.is_empty()
    }

    /// Directly specified mean map and variances.
    pub fn from_parts(state_dim: usize, action_dim: usize, weights: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if weights.len() != (state_dim + action_dim + 1) * state_dim || variance.len() != state_dim {
            return Err(Error::rejected("dynamics model shape mismatch"));
        }
        if variance.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::rejected("dynamics model variances must be positive"));
        }
        Ok(GaussianDynamicsModel { state_dim, action_dim, weights, variance })
    }

    pub fn fit(&mut self, data: &[Transition], ridge: f64) -> Result<()> {
        if data.is_empty() {
            return Err(Error::rejected("cannot fit a dynamics model on no data"));
        }
        let (sd, f) = (self.state_dim, self.state_dim + self.action_dim + 1);
        let mut xtx = vec![0.0; f * f];
        let mut xty = vec![0.0; f * sd];
        let mut x = Vec::with_capacity(f);
        for t in data {
            x.clear();
            x.extend_from_slice(&t.s);
            x.extend_from_slice(&t.a);
            x.push(1.0);
            if x.len() != f || t.s_next.len() != sd {
                return Err(Error::rejected("transition shape does not match the dynamics model"));
            }
            for i in 0..f {
                for j in 0..f {
                    xtx[i * f + j] += x[i] * x[j];
                }
                for k in 0..sd {
                    xty[i * sd + k] += x[i] * t.s_next[k];
                }
            }
        }
        for i in 0..f {
            xtx[i * f + i] += ridge;
        }
        let l = cholesky(&xtx, f)?;
        let mut weights = vec![0.0; f * sd];
        for k in 0..sd {
            let col: Vec<f64> = (0..f).map(|i| xty[i * sd + k]).collect();
            for (i, w) in cholesky_solve(&l, f, &col).into_iter().enumerate() {
                weights[i * sd + k] = w;
            }
        }
        self.weights = weights;
        let mut var = vec![0.0; sd];
        for t in data {
            let m = self.mean(&t.s, &t.a);
            for k in 0..sd {
                var[k] += (t.s_next[k] - m[k]).powi(2) / data.len() as f64;
            }
        }
        self.variance = var.into_iter().map(|v| v.max(1e-8)).collect();
        Ok(())
    }

    pub fn mean(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let sd = self.state_dim;
        let mut m: Vec<f64> = self.weights[(sd + self.action_dim) * sd..].to_vec();
        for (i, &xi) in s.iter().chain(a).enumerate() {
            for k in 0..sd {
                m[k] += xi * self.weights[i * sd + k];
            }
        }
        m
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: &[f64], a: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::rejected("dynamics model has not been fitted"));
        }
        if s.len() != self.state_dim || a.len() != self.action_dim {
            return Err(Error::rejected("dynamics model input shape mismatch"));
        }
        use rand_distr::{Distribution, StandardNormal};
        Ok(self
            .mean(s, a)
            .into_iter()
            .zip(&self.variance)
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * z
            })
            .collect())
    }
}

/// Reverse-KL gap measure: sum of log real/sim ratios at `n` draws from a learned
/// forward model of the real dynamics, with the same clipping as [`gap_measure_u`].
pub fn gap_measure_u_reverse<M, R>(
    dynamics: &GaussianDynamicsModel,
    ratio: &M,
    s: &[f64],
    a: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<f64>
where
    M: DynamicsRatio + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::rejected("need at least one KL sample"));
    }
    let mut total = 0.0;
    for _ in 0..n {
        let draw = dynamics.sample(s, a, rng)?;
        total -= ratio.log_ratio_sim_over_real(s, a, &draw)?;
    }
    Ok(clip_u(total))
}
