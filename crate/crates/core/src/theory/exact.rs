use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::linalg::solve_linear;
use crate::envs::{Domain, TabularMdpPair};
use crate::error::{Error, Result};
use crate::scalar::{logsumexp, Scalar};

fn dist_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

fn check_distribution<T: Scalar>(p: &[T], what: &str) -> Result<()> {
    if p.iter().any(|&x| x < T::zero() || !x.is_finite()) {
        return Err(Error::rejected(format!("{what} has negative or non-finite entries")));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > dist_tol::<T>() {
        return Err(Error::rejected(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Distributions over `(s, a)` stored at `[s * n_actions + a]`, and two policies.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDistributions<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub omega: Vec<T>,
    /// Discounted state-action occupancy of the data policy in the real system.
    pub d_data: Vec<T>,
    /// Discounted state-action occupancy of the learned policy in the simulator.
    pub d_sim: Vec<T>,
    pub pi_data: Vec<T>,
    pub pi: Vec<T>,
}

impl<T: Scalar> TabularDistributions<T> {
    /// Exact KL-based `omega` and occupancies for the two policies.
    pub fn from_mdp(mdp: &TabularMdpPair<T>, pi_data: &[T], pi: &[T]) -> Result<Self> {
        let d = TabularDistributions {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            omega: exact_gap_omega(mdp)?,
            d_data: occupancy(mdp, Domain::Real, pi_data)?,
            d_sim: occupancy(mdp, Domain::Sim, pi)?,
            pi_data: pi_data.to_vec(),
            pi: pi.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states * self.n_actions;
        for (v, name) in [(&self.omega, "omega"), (&self.d_data, "d_data"), (&self.d_sim, "d_sim")] {
            if v.len() != n {
                return Err(Error::rejected(format!("{name} has the wrong length")));
            }
            check_distribution(v, name)?;
        }
        for (p, name) in [(&self.pi_data, "pi_data"), (&self.pi, "pi")] {
            if p.len() != n {
                return Err(Error::rejected(format!("{name} has the wrong length")));
            }
            for s in 0..self.n_states {
                check_distribution(&p[s * self.n_actions..(s + 1) * self.n_actions], name)?;
            }
        }
        Ok(())
    }

    fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn data_state_marginal(&self, s: usize) -> T {
        self.d_data[s * self.n_actions..(s + 1) * self.n_actions].iter().copied().sum()
    }

    pub fn sim_state_marginal(&self, s: usize) -> T {
        self.d_sim[s * self.n_actions..(s + 1) * self.n_actions].iter().copied().sum()
    }

    /// `pi_data(a|s) / pi(a|s)`, zero where both vanish.
    fn policy_ratio(&self, s: usize, a: usize) -> Result<T> {
        let (pd, p) = (self.pi_data[self.idx(s, a)], self.pi[self.idx(s, a)]);
        if p > T::zero() {
            Ok(pd / p)
        } else if pd == T::zero() {
            Ok(T::zero())
        } else {
            Err(Error::rejected(format!("pi(a|s) = 0 where pi_data(a|s) > 0 at ({s}, {a})")))
        }
    }

    fn max_policy_ratio(&self, s: usize) -> Result<T> {
        (0..self.n_actions).try_fold(T::zero(), |m, a| Ok(m.max(self.policy_ratio(s, a)?)))
    }
}

/// `KL(P_sim(.|s,a) || P_real(.|s,a))` for every pair.
pub fn kl_gap<T: Scalar>(mdp: &TabularMdpPair<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(mdp.n_states * mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut kl = T::zero();
            for (&q, &p) in mdp.row(Domain::Sim, s, a).iter().zip(mdp.row(Domain::Real, s, a)) {
                if q > T::zero() {
                    if p == T::zero() {
                        return Err(Error::rejected(format!("simulator reaches a state the real system cannot at ({s}, {a})")));
                    }
                    kl += q * (q / p).ln();
                }
            }
            out.push(kl.max(T::zero()));
        }
    }
    Ok(out)
}

/// KL gap normalized over all state-action pairs.
pub fn exact_gap_omega<T: Scalar>(mdp: &TabularMdpPair<T>) -> Result<Vec<T>> {
    let u = kl_gap(mdp)?;
    let z: T = u.iter().copied().sum();
    if !(z > T::zero()) {
        return Err(Error::rejected("real and simulated dynamics coincide; omega is undefined"));
    }
    Ok(u.into_iter().map(|x| x / z).collect())
}

/// Normalized discounted occupancy `(1 - gamma) sum_t gamma^t Pr(s_t = s, a_t = a)`.
pub fn occupancy<T: Scalar>(mdp: &TabularMdpPair<T>, domain: Domain, policy: &[T]) -> Result<Vec<T>> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    if policy.len() != ns * na {
        return Err(Error::rejected("policy table has the wrong length"));
    }
    // (I - gamma P_pi^T) d_s = (1 - gamma) mu_0
    let mut m = vec![T::zero(); ns * ns];
    for i in 0..ns {
        m[i * ns + i] = T::one();
    }
    for s in 0..ns {
        for a in 0..na {
            let w = policy[s * na + a];
            for (s2, &p) in mdp.row(domain, s, a).iter().enumerate() {
                m[s2 * ns + s] -= mdp.gamma * w * p;
            }
        }
    }
    let rhs: Vec<T> = mdp.initial_distribution.iter().map(|&x| (T::one() - mdp.gamma) * x).collect();
    let ds = solve_linear(&m, &rhs, ns)?;
    Ok((0..ns * na).map(|i| (ds[i / na] * policy[i]).max(T::zero())).collect())
}

/// Maximizer of `E_d[Q] - KL(d || omega)` over the simplex: `omega exp(Q) / Z`.
pub fn closed_form_dphi<T: Scalar>(omega: &[T], q: &[T]) -> Result<Vec<T>> {
    if omega.is_empty() || omega.len() != q.len() {
        return Err(Error::rejected("omega and Q must be non-empty and the same length"));
    }
    if omega.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::rejected("omega must be strictly positive"));
    }
    let z: Vec<T> = omega.iter().zip(q).map(|(&w, &qi)| w.ln() + qi).collect();
    let lse = logsumexp(&z);
    Ok(z.into_iter().map(|v| (v - lse).exp()).collect())
}

/// `E_d[Q] - KL(d || omega)`.
pub fn dphi_objective<T: Scalar>(d: &[T], omega: &[T], q: &[T]) -> T {
    d.iter()
        .zip(omega.iter().zip(q))
        .map(|(&di, (&wi, &qi))| if di > T::zero() { di * (qi - (di / wi).ln()) } else { T::zero() })
        .sum()
}

/// `(sum omega Q, log sum omega exp Q, sum omega Q + Var_omega[exp Q] / (2 exp(2 Q_min)))`.
pub fn logsumexp_bounds<T: Scalar>(omega: &[T], q: &[T], q_min: T) -> Result<(T, T, T)> {
    if omega.is_empty() || omega.len() != q.len() {
        return Err(Error::rejected("omega and Q must be non-empty and the same length"));
    }
    check_distribution(omega, "omega")?;
    if !(q_min > T::zero()) || q.iter().any(|&x| x < q_min) {
        return Err(Error::rejected("Q must be bounded below by a positive Q_min"));
    }
    let lhs: T = omega.iter().zip(q).map(|(&w, &x)| w * x).sum();
    let z: Vec<T> = omega.iter().zip(q).filter(|(&w, _)| w > T::zero()).map(|(&w, &x)| w.ln() + x).collect();
    let mid = logsumexp(&z);
    let mean_e: T = omega.iter().zip(q).map(|(&w, &x)| w * x.exp()).sum();
    let var: T = omega.iter().zip(q).map(|(&w, &x)| w * (x.exp() - mean_e).powi(2)).sum();
    let rhs = lhs + var / (T::lit(2.0) * (T::lit(2.0) * q_min).exp());
    Ok((lhs, mid, rhs))
}

/// Reward adjustment `(omega - d_data) / (d_data + d_sim)` at `(s, a)`.
pub fn exact_nu<T: Scalar>(dist: &TabularDistributions<T>, s: usize, a: usize) -> Result<T> {
    let i = dist.idx(s, a);
    let den = dist.d_data[i] + dist.d_sim[i];
    if !(den > T::zero()) {
        return Err(Error::rejected(format!("({s}, {a}) is reached by neither data source")));
    }
    Ok((dist.omega[i] - dist.d_data[i]) / den)
}

pub fn nu_table<T: Scalar>(dist: &TabularDistributions<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(dist.n_states * dist.n_actions);
    for s in 0..dist.n_states {
        for a in 0..dist.n_actions {
            out.push(exact_nu(dist, s, a)?);
        }
    }
    Ok(out)
}

/// Result of iterating the penalized Bellman operator to convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution<T> {
    pub q: Vec<T>,
    pub iterations: usize,
    /// Sup-norm change of every sweep.
    pub residuals: Vec<T>,
    /// Largest `(residual[k + 1] - rounding) / residual[k]`, where `rounding` bounds the
    /// floating-point error of one sweep.
    pub max_decay_ratio: T,
}

pub const DP_MAX_ITERATIONS: usize = 1_000_000;

fn expected_next<T: Scalar>(mdp: &TabularMdpPair<T>, pi: &[T], q: &[T], s: usize, a: usize) -> T {
    let na = mdp.n_actions;
    mdp.row(Domain::Real, s, a)
        .iter()
        .enumerate()
        .map(|(s2, &p)| p * (0..na).map(|a2| pi[s2 * na + a2] * q[s2 * na + a2]).sum::<T>())
        .sum()
}

/// Iterates `Q <- r + gamma P_real^pi Q - beta nu` from zero until the sup-norm change is below `tol`.
pub fn dp_fixed_point<T: Scalar>(mdp: &TabularMdpPair<T>, pi: &[T], nu: &[T], beta: T, tol: T) -> Result<DpSolution<T>> {
    let n = mdp.n_states * mdp.n_actions;
    if pi.len() != n || nu.len() != n {
        return Err(Error::rejected("policy and nu tables must cover every state-action pair"));
    }
    if !(mdp.gamma < T::one()) {
        return Err(Error::rejected("gamma must be below 1"));
    }
    let mut q = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut residuals = Vec::new();
    let mut max_decay_ratio = T::zero();
    for it in 1..=DP_MAX_ITERATIONS {
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let i = s * mdp.n_actions + a;
                next[i] = mdp.reward[i] + mdp.gamma * expected_next(mdp, pi, &q, s, a) - beta * nu[i];
            }
        }
        let res = q.iter().zip(&next).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), T::max);
        std::mem::swap(&mut q, &mut next);
        let scale = q.iter().fold(T::one(), |m, &x| m.max(x.abs()));
        let rounding = T::lit(4.0 * (mdp.n_states * mdp.n_actions) as f64) * T::epsilon() * scale;
        if let Some(&prev) = residuals.last() {
            if prev > T::zero() {
                max_decay_ratio = max_decay_ratio.max((res - rounding) / prev);
            }
        }
        residuals.push(res);
        if res < tol {
            return Ok(DpSolution { q, iterations: it, residuals, max_decay_ratio });
        }
    }
    Err(Error::NoConvergence {
        iterations: DP_MAX_ITERATIONS,
        residual: residuals.last().and_then(|r| r.to_f64()).unwrap_or(f64::NAN),
    })
}

/// `Q^pi` in the chosen system from `(I - gamma P Pi) Q = r`.
pub fn policy_evaluation<T: Scalar>(mdp: &TabularMdpPair<T>, pi: &[T], domain: Domain) -> Result<Vec<T>> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let n = ns * na;
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
        let (s, a) = (i / na, i % na);
        for (s2, &p) in mdp.row(domain, s, a).iter().enumerate() {
            for a2 in 0..na {
                m[i * n + s2 * na + a2] -= mdp.gamma * p * pi[s2 * na + a2];
            }
        }
    }
    solve_linear(&m, &mdp.reward, n)
}

/// `V(s) = sum_a pi(a|s) Q(s, a)`.
pub fn state_values<T: Scalar>(q: &[T], pi: &[T], n_actions: usize) -> Vec<T> {
    q.chunks(n_actions).zip(pi.chunks(n_actions)).map(|(qs, ps)| qs.iter().zip(ps).map(|(&x, &p)| x * p).sum()).collect()
}

/// `zeta(s, a)`; equal to one at states the data never visits.
pub fn zeta<T: Scalar>(dist: &TabularDistributions<T>, s: usize, a: usize) -> Result<T> {
    let dd = dist.data_state_marginal(s);
    if dd == T::zero() {
        return Ok(T::one());
    }
    let ds = dist.sim_state_marginal(s);
    let num = dd * dist.max_policy_ratio(s)? + ds;
    let den = dd * dist.policy_ratio(s, a)? + ds;
    if !(den > T::zero()) {
        return Err(Error::rejected(format!("zeta undefined at ({s}, {a})")));
    }
    Ok(num / den)
}

/// Underestimation condition at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<T> {
    pub holds: bool,
    /// `sum_a omega - sum_a d_data zeta`.
    pub margin: T,
    /// The data policy never visits this state, so `zeta` was taken as one.
    pub data_absent: bool,
}

pub fn theorem1_condition<T: Scalar>(dist: &TabularDistributions<T>, s: usize) -> Result<ConditionReport<T>> {
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for a in 0..dist.n_actions {
        lhs += dist.omega[dist.idx(s, a)];
        rhs += dist.d_data[dist.idx(s, a)] * zeta(dist, s, a)?;
    }
    let margin = lhs - rhs;
    Ok(ConditionReport { holds: margin > T::zero(), margin, data_absent: dist.data_state_marginal(s) == T::zero() })
}

/// Sampling-error version of the condition margin for `count` samples per pair and
/// concentration constant `c_p`: the exact margin of
/// [`theorem1_condition`] minus
/// `gamma c_p r_max (d_data(s) max ratio + d_sim(s)) / (beta (1 - gamma) sqrt(count))`.
pub fn theorem2_margin<T: Scalar>(
    dist: &TabularDistributions<T>,
    s: usize,
    gamma: T,
    r_max: T,
    beta: T,
    c_p: T,
    count: T,
) -> Result<T> {
    if !(beta > T::zero() && count > T::zero()) {
        return Err(Error::rejected("beta and count must be positive"));
    }
    let base = theorem1_condition(dist, s)?.margin;
    let scale = dist.data_state_marginal(s) * dist.max_policy_ratio(s)? + dist.sim_state_marginal(s);
    Ok(base - gamma * c_p * r_max * scale / (beta * (T::one() - gamma) * count.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCheck<T> {
    pub state: usize,
    pub condition: ConditionReport<T>,
    pub v_hat: T,
    pub v_true: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnderestimationReport<T> {
    pub states: Vec<StateCheck<T>>,
    /// States where the condition holds but `v_hat > v_true + tol`.
    pub counterexamples: Vec<usize>,
    /// Largest `v_hat - v_true` over condition states (negative infinity if none).
    pub max_violation: T,
    pub dp: DpSolution<T>,
}

impl<T: Scalar> UnderestimationReport<T> {
    pub fn condition_states(&self) -> usize {
        self.states.iter().filter(|c| c.condition.holds).count()
    }
}

/// Penalized DP fixed point against exact policy evaluation, state by state.
pub fn verify_underestimation<T: Scalar>(
    mdp: &TabularMdpPair<T>,
    pi: &[T],
    dist: &TabularDistributions<T>,
    beta: T,
    tol: T,
) -> Result<UnderestimationReport<T>> {
    let nu = nu_table(dist)?;
    let dp = dp_fixed_point(mdp, pi, &nu, beta, T::lit(1e-10).max(T::epsilon() * T::lit(16.0)))?;
    let v_hat = state_values(&dp.q, pi, mdp.n_actions);
    let v_true = state_values(&policy_evaluation(mdp, pi, Domain::Real)?, pi, mdp.n_actions);
    let mut states = Vec::with_capacity(mdp.n_states);
    let mut counterexamples = Vec::new();
    let mut max_violation = T::neg_infinity();
    for s in 0..mdp.n_states {
        let condition = theorem1_condition(dist, s)?;
        if condition.holds {
            let gap = v_hat[s] - v_true[s];
            max_violation = max_violation.max(gap);
            if gap > tol {
                counterexamples.push(s);
            }
        }
        states.push(StateCheck { state: s, condition, v_hat: v_hat[s], v_true: v_true[s] });
    }
    Ok(UnderestimationReport { states, counterexamples, max_violation, dp })
}

/// Policy table with Dirichlet(1, ..., 1) rows.
pub fn random_policy<T: Scalar>(seed: u64, n_states: usize, n_actions: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let draws: Vec<f64> = (0..n_actions).map(|_| Exp1.sample(&mut rng)).collect();
        let z: f64 = draws.iter().sum();
        out.extend(draws.into_iter().map(|x| T::lit(x / z)));
    }
    out
}

/// One line of the machine-readable verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub seed: u64,
    pub beta: f64,
    pub condition_states: usize,
    pub max_violation: f64,
    pub counterexamples: usize,
    pub max_decay_ratio: f64,
}
