//! Exact tabular checks of the gap-weighted regularizer: the closed-form sampling
//! distribution, log-sum-exp bounds, the reward-adjustment fixed point and the
//! value-underestimation conditions.

mod exact;
mod linalg;

pub use exact::*;
pub use linalg::solve_linear;

use crate::envs::random_tabular_pair;
use crate::error::Result;

/// Random instance, data policy and learned policy, then the underestimation check.
pub fn verify_instance(seed: u64, n_states: usize, n_actions: usize, gap_scale: f64, beta: f64, tol: f64) -> Result<InstanceReport> {
    let mdp = random_tabular_pair::<f64>(seed, n_states, n_actions, gap_scale)?;
    let pi_data = random_policy::<f64>(seed.wrapping_mul(2).wrapping_add(1_000_003), n_states, n_actions);
    let pi = random_policy::<f64>(seed.wrapping_mul(2).wrapping_add(2_000_003), n_states, n_actions);
    let dist = TabularDistributions::from_mdp(&mdp, &pi_data, &pi)?;
    let rep = verify_underestimation(&mdp, &pi, &dist, beta, tol)?;
    Ok(InstanceReport {
        seed,
        beta,
        condition_states: rep.condition_states(),
        max_violation: rep.max_violation,
        counterexamples: rep.counterexamples.len(),
        max_decay_ratio: rep.dp.max_decay_ratio,
    })
}
