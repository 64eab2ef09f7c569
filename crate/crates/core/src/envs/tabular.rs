//! Explicit real/simulated transition tables for exact theory checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper end of the reward range used by [`random_tabular_pair`].
pub const TABULAR_R_MAX: f64 = 1.0;

/// Which system a transition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Sim,
}

/// Real and simulated MDPs sharing states, actions, rewards, discount and start distribution.
///
/// Transition rows are stored at `[(s * n_actions + a) * n_states + s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdpPair<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub p_real: Vec<T>,
    pub p_sim: Vec<T>,
    /// `r(s, a)` at `[s * n_actions + a]`.
    pub reward: Vec<T>,
    pub r_max: T,
    pub gamma: T,
    pub initial_distribution: Vec<T>,
}

impl<T: Scalar> TabularMdpPair<T> {
    pub fn transitions(&self, domain: Domain) -> &[T] {
        match domain {
            Domain::Real => &self.p_real,
            Domain::Sim => &self.p_sim,
        }
    }

    pub fn row(&self, domain: Domain, s: usize, a: usize) -> &[T] {
        let n = self.n_states;
        let start = (s * self.n_actions + a) * n;
        &self.transitions(domain)[start..start + n]
    }

    pub fn reward_at(&self, s: usize, a: usize) -> T {
        self.reward[s * self.n_actions + a]
    }

    /// Checks shapes, row normalization (1e-12), non-negativity and the reward range.
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::rejected("empty state or action space"));
        }
        if self.p_real.len() != ns * na * ns || self.p_sim.len() != ns * na * ns || self.reward.len() != ns * na {
            return Err(Error::rejected("table shapes do not match n_states/n_actions"));
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::rejected("gamma must lie in (0, 1)"));
        }
        let tol = T::lit(1e-12);
        for domain in [Domain::Real, Domain::Sim] {
            for s in 0..ns {
                for a in 0..na {
                    let row = self.row(domain, s, a);
                    if row.iter().any(|&p| p < T::zero()) {
                        return Err(Error::rejected(format!("negative probability at ({s}, {a})")));
                    }
                    let total: T = row.iter().copied().sum();
                    if (total - T::one()).abs() > tol {
                        return Err(Error::rejected(format!("row ({s}, {a}) sums to {total}")));
                    }
                }
            }
        }
        if self.reward.iter().any(|&r| r < T::zero() || r > self.r_max) {
            return Err(Error::rejected("reward outside [0, r_max]"));
        }
        let total: T = self.initial_distribution.iter().copied().sum();
        if self.initial_distribution.len() != ns || (total - T::one()).abs() > tol {
            return Err(Error::rejected("initial distribution is not a distribution"));
        }
        Ok(())
    }

    /// Draws `s'` from the chosen system's row and returns it with `r(s, a)`.
    pub fn sample<R: Rng + ?Sized>(&self, domain: Domain, s: usize, a: usize, rng: &mut R) -> Result<(usize, T)> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::rejected(format!("(s, a) = ({s}, {a}) out of range")));
        }
        let row = self.row(domain, s, a);
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let mut last_positive = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > T::zero() {
                last_positive = j;
            }
            acc += p;
            if u < acc && p > T::zero() {
                return Ok((j, self.reward_at(s, a)));
            }
        }
        // Rounding left a sliver above the cumulative sum.
        Ok((last_positive, self.reward_at(s, a)))
    }

    /// Total-variation distance between the real and simulated rows at `(s, a)`.
    pub fn tv_distance(&self, s: usize, a: usize) -> T {
        let r = self.row(Domain::Real, s, a);
        let q = self.row(Domain::Sim, s, a);
        T::lit(0.5) * r.iter().zip(q).map(|(&x, &y)| (x - y).abs()).sum::<T>()
    }
}

fn dirichlet_ones<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let z: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / z).collect()
}

/// Random MDP pair: Dirichlet(1, ..., 1) real rows, simulator rows mixed toward an
/// independent Dirichlet draw by `gap_scale`. Discount 0.9, uniform start, rewards in `[0, 1]`.
pub fn random_tabular_pair<T: Scalar>(seed: u64, n_states: usize, n_actions: usize, gap_scale: f64) -> Result<TabularMdpPair<T>> {
    if n_states < 2 || n_actions < 2 {
        return Err(Error::rejected("need at least two states and two actions"));
    }
    if !(0.0..=1.0).contains(&gap_scale) {
        return Err(Error::rejected(format!("gap_scale {gap_scale} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = n_states * n_actions;
    let mut p_real = Vec::with_capacity(rows * n_states);
    let mut other = Vec::with_capacity(rows * n_states);
    for _ in 0..rows {
        p_real.extend(dirichlet_ones(n_states, &mut rng));
    }
    for _ in 0..rows {
        other.extend(dirichlet_ones(n_states, &mut rng));
    }
    let p_sim = if gap_scale == 0.0 {
        p_real.clone()
    } else {
        let mut mixed = Vec::with_capacity(rows * n_states);
        for r in 0..rows {
            let lo = r * n_states;
            let row: Vec<f64> = (lo..lo + n_states).map(|i| (1.0 - gap_scale) * p_real[i] + gap_scale * other[i]).collect();
            let z: f64 = row.iter().sum();
            mixed.extend(row.into_iter().map(|x| x / z));
        }
        mixed
    };
    let reward: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..=TABULAR_R_MAX)).collect();
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let pair = TabularMdpPair {
        n_states,
        n_actions,
        p_real: conv(p_real),
        p_sim: conv(p_sim),
        reward: conv(reward),
        r_max: T::lit(TABULAR_R_MAX),
        gamma: T::lit(0.9),
        initial_distribution: vec![T::one() / T::lit(n_states as f64); n_states],
    };
    Ok(pair)
}
