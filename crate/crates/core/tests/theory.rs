mod common;

use h2o_core::envs::{random_tabular_pair, Domain};
use h2o_core::theory::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

fn instance(seed: u64) -> (h2o_core::envs::TabularMdpPair<f64>, Vec<f64>, TabularDistributions<f64>) {
    let mdp = random_tabular_pair::<f64>(seed, 10, 3, 0.5).unwrap();
    let pi_d = random_policy::<f64>(seed + 100, 10, 3);
    let pi = random_policy::<f64>(seed + 200, 10, 3);
    let dist = TabularDistributions::from_mdp(&mdp, &pi_d, &pi).unwrap();
    (mdp, pi, dist)
}

#[test]
fn dphi_constant_q_returns_omega() {
    let omega = [0.1f64, 0.6, 0.3];
    let d = closed_form_dphi(&omega, &[2.5; 3]).unwrap();
    for (a, b) in d.iter().zip(omega) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn dphi_two_cell_example() {
    let d = closed_form_dphi(&[0.5, 0.5], &[2f64.ln(), 0.0]).unwrap();
    assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && (d[1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn dphi_rejects_zero_omega() {
    assert!(closed_form_dphi(&[0.0, 1.0], &[1.0, 1.0]).is_err());
}

#[test]
fn dphi_matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let omega = random_simplex(&mut rng, 5);
        let q: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let closed = closed_form_dphi(&omega, &q).unwrap();
        let numeric = common::numeric_dphi(&omega, &q);
        let err = closed.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        assert!(dphi_objective(&closed, &omega, &q) >= dphi_objective(&numeric, &omega, &q) - 1e-12);
    }
}

#[test]
fn logsumexp_bounds_constant_and_example() {
    let (l, m, r) = logsumexp_bounds(&[0.25f64, 0.75], &[1.3, 1.3], 1.3).unwrap();
    assert!((l - 1.3).abs() < 1e-15 && (m - 1.3).abs() < 1e-15 && (r - 1.3).abs() < 1e-15);

    let e = 1f64.exp();
    let (l, m, r) = logsumexp_bounds(&[0.5, 0.5], &[1.0, 2.0], 1.0).unwrap();
    assert_eq!(l, 1.5);
    assert!((m - (0.5 * e + 0.5 * e * e).ln()).abs() < 1e-14);
    assert!((m - 1.6201).abs() < 1e-4);
    let mean = 0.5 * e + 0.5 * e * e;
    let var = 0.5 * (e - mean).powi(2) + 0.5 * (e * e - mean).powi(2);
    assert!((r - (1.5 + var / (2.0 * e * e))).abs() < 1e-14);
    assert!(l <= m && m <= r);
}

#[test]
fn logsumexp_bounds_preconditions() {
    assert!(logsumexp_bounds(&[0.5, 0.5], &[1.0, 0.5], 1.0).is_err());
    assert!(logsumexp_bounds(&[0.5, 0.5], &[1.0, 2.0], 0.0).is_err());
    assert!(logsumexp_bounds(&[0.5, 0.6], &[1.0, 2.0], 1.0).is_err());
}

fn dist2(omega: Vec<f64>, d_data: Vec<f64>, pi_data: Vec<f64>, pi: Vec<f64>) -> TabularDistributions<f64> {
    TabularDistributions { n_states: 2, n_actions: 2, omega, d_data, d_sim: vec![0.25; 4], pi_data, pi }
}

#[test]
fn nu_examples() {
    let d = dist2(vec![0.2, 0.3, 0.0, 0.5], vec![0.1, 0.3, 0.2, 0.4], vec![0.5; 4], vec![0.5; 4]);
    let mut d = d;
    d.d_sim = vec![0.1, 0.2, 0.2, 0.5];
    assert!((exact_nu(&d, 0, 0).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(exact_nu(&d, 0, 1).unwrap(), 0.0);
    assert!((exact_nu(&d, 1, 0).unwrap() + 0.5).abs() < 1e-15);
    let mut z = d.clone();
    z.d_data[0] = 0.0;
    z.d_sim[0] = 0.0;
    assert!(exact_nu(&z, 0, 0).is_err());
}

#[test]
fn two_state_condition_holds_then_fails() {
    // pi_data uniform; pi = (0.25, 0.75) at s0 and uniform at s1.
    // zeta(s0, a1) = (0.4 * 2 + 0.5) / (0.4 * 2/3 + 0.5) = 1.3 / 0.7666.. = 1.6956522
    // margin(s0) = 0.6 - (0.2 + 0.2 * 1.6956522) = 0.0608696, margin(s1) = 0.4 - 0.6 = -0.2
    let d = dist2(vec![0.3, 0.3, 0.2, 0.2], vec![0.2, 0.2, 0.3, 0.3], vec![0.5; 4], vec![0.25, 0.75, 0.5, 0.5]);
    d.validate().unwrap();
    assert!((zeta(&d, 0, 0).unwrap() - 1.0).abs() < 1e-15);
    assert!((zeta(&d, 0, 1).unwrap() - 1.6956522).abs() < 1e-7);
    let c0 = theorem1_condition(&d, 0).unwrap();
    let c1 = theorem1_condition(&d, 1).unwrap();
    assert!(c0.holds && (c0.margin - 0.0608696).abs() < 1e-7);
    assert!(!c1.holds && (c1.margin + 0.2).abs() < 1e-15);
}

#[test]
fn equal_policies_reduce_to_marginal_comparison() {
    let (_, _, mut dist) = instance(3);
    dist.pi = dist.pi_data.clone();
    for s in 0..10 {
        for a in 0..3 {
            assert!((zeta(&dist, s, a).unwrap() - 1.0).abs() < 1e-14);
        }
        let om: f64 = dist.omega[s * 3..s * 3 + 3].iter().sum();
        let c = theorem1_condition(&dist, s).unwrap();
        assert!((c.margin - (om - dist.data_state_marginal(s))).abs() < 1e-14);
    }
}

#[test]
fn absent_data_state_is_flagged() {
    let d = dist2(vec![0.3, 0.3, 0.2, 0.2], vec![0.5, 0.5, 0.0, 0.0], vec![0.5; 4], vec![0.25, 0.75, 0.5, 0.5]);
    assert_eq!(zeta(&d, 1, 0).unwrap(), 1.0);
    assert!(theorem1_condition(&d, 1).unwrap().data_absent);
    assert!(!theorem1_condition(&d, 0).unwrap().data_absent);
}

#[test]
fn undefined_policy_ratio_rejected() {
    let d = dist2(vec![0.25; 4], vec![0.25; 4], vec![0.5; 4], vec![0.0, 1.0, 0.5, 0.5]);
    assert!(zeta(&d, 0, 1).is_err());
}

#[test]
fn zeta_at_least_one_on_random_instances() {
    for seed in 0..10 {
        let (_, _, dist) = instance(seed);
        for s in 0..10 {
            for a in 0..3 {
                assert!(zeta(&dist, s, a).unwrap() >= 1.0 - 1e-12);
            }
        }
    }
}

#[test]
fn occupancies_are_consistent_distributions() {
    let (mdp, pi, dist) = instance(8);
    dist.validate().unwrap();
    // d(s, a) = d(s) pi(a|s)
    for s in 0..10 {
        let m = dist.sim_state_marginal(s);
        for a in 0..3 {
            assert!((dist.d_sim[s * 3 + a] - m * pi[s * 3 + a]).abs() < 1e-15);
        }
    }
    // Monte-Carlo discounted visitation in the simulator agrees to a few percent.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = vec![0.0; 30];
    let episodes = 20_000;
    for _ in 0..episodes {
        let mut s = rng.random_range(0..10);
        loop {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut a = 2;
            for k in 0..3 {
                acc += pi[s * 3 + k];
                if u < acc {
                    a = k;
                    break;
                }
            }
            counts[s * 3 + a] += 1.0;
            if rng.random::<f64>() > mdp.gamma {
                break;
            }
            s = mdp.sample(Domain::Sim, s, a, &mut rng).unwrap().0;
        }
    }
    let total: f64 = counts.iter().sum();
    for i in 0..30 {
        assert!((counts[i] / total - dist.d_sim[i]).abs() < 0.01);
    }
}

#[test]
fn dp_without_penalty_is_policy_evaluation() {
    let (mdp, pi, dist) = instance(4);
    let truth = policy_evaluation(&mdp, &pi, Domain::Real).unwrap();
    let nu = nu_table(&dist).unwrap();
    for (nu_used, beta) in [(nu.clone(), 0.0), (vec![0.0; 30], 1.0)] {
        let q = dp_fixed_point(&mdp, &pi, &nu_used, beta, 1e-10).unwrap().q;
        for (a, b) in q.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn constant_nu_shifts_uniformly() {
    let (mdp, pi, _) = instance(6);
    let truth = policy_evaluation(&mdp, &pi, Domain::Real).unwrap();
    let (beta, c) = (0.7, 0.3);
    let q = dp_fixed_point(&mdp, &pi, &[c; 30], beta, 1e-10).unwrap().q;
    let shift = beta * c / (1.0 - mdp.gamma);
    for (a, b) in q.iter().zip(&truth) {
        assert!((a - (b - shift)).abs() < 1e-8);
    }
}

#[test]
fn dp_residuals_contract() {
    let (mdp, pi, dist) = instance(2);
    let sol = dp_fixed_point(&mdp, &pi, &nu_table(&dist).unwrap(), 1.0, 1e-10).unwrap();
    assert!(sol.max_decay_ratio <= mdp.gamma + 1e-9, "{}", sol.max_decay_ratio);
    assert!(*sol.residuals.last().unwrap() < 1e-10);
}

#[test]
fn dp_rejects_bad_tables() {
    let (mdp, pi, _) = instance(2);
    assert!(dp_fixed_point(&mdp, &pi, &[0.0; 3], 1.0, 1e-10).is_err());
}

#[test]
fn omega_equal_to_data_is_vacuous() {
    let (mdp, pi, mut dist) = instance(9);
    dist.omega = dist.d_data.clone();
    let rep = verify_underestimation(&mdp, &pi, &dist, 1.0, 1e-8).unwrap();
    assert_eq!(rep.condition_states(), 0);
    for c in &rep.states {
        assert!((c.v_hat - c.v_true).abs() < 1e-8);
    }
}

#[test]
fn random_instances_have_no_counterexamples() {
    for seed in 0..20 {
        for beta in [0.1, 1.0] {
            let r = verify_instance(seed, 10, 3, 0.5, beta, 1e-8).unwrap();
            assert_eq!(r.counterexamples, 0, "{r:?}");
            assert!(r.max_decay_ratio <= 0.9 + 1e-9);
        }
    }
}

#[test]
fn concentrating_omega_lowers_value_there() {
    let (mdp, pi, dist) = instance(12);
    let target = 4;
    let v_hat = |omega: &[f64]| {
        let mut d = dist.clone();
        d.omega = omega.to_vec();
        let rep = verify_underestimation(&mdp, &pi, &d, 1.0, 1e-8).unwrap();
        rep.states[target].v_hat
    };
    let base = v_hat(&dist.omega);
    let shifted: Vec<f64> = dist
        .omega
        .iter()
        .enumerate()
        .map(|(i, &w)| 0.5 * w + if i / 3 == target { 0.5 / 3.0 } else { 0.0 })
        .collect();
    assert!(v_hat(&shifted) < base);
}

#[test]
fn theorem2_margin_approaches_theorem1() {
    let (mdp, _, dist) = instance(1);
    for s in 0..10 {
        let m1 = theorem1_condition(&dist, s).unwrap().margin;
        let mut prev = f64::INFINITY;
        for k in [12, 14, 16, 18, 20] {
            let count = 10f64.powi(k);
            let m2 = theorem2_margin(&dist, s, mdp.gamma, mdp.r_max, 0.1, 1.0, count).unwrap();
            let gap = m1 - m2;
            assert!(gap >= 0.0 && gap < prev);
            if k == 20 {
                assert!(gap < 1e-6);
            }
            prev = gap;
        }
    }
}

#[test]
fn kl_gap_vanishes_for_identical_dynamics() {
    let mdp = random_tabular_pair::<f64>(0, 4, 2, 0.0).unwrap();
    assert!(kl_gap(&mdp).unwrap().iter().all(|&u| u == 0.0));
    assert!(exact_gap_omega(&mdp).is_err());
}

#[test]
fn generic_over_f32() {
    let mdp = random_tabular_pair::<f32>(0, 5, 2, 0.5).unwrap();
    let pi = random_policy::<f32>(1, 5, 2);
    let q = policy_evaluation(&mdp, &pi, Domain::Real).unwrap();
    let q64 = policy_evaluation(&random_tabular_pair::<f64>(0, 5, 2, 0.5).unwrap(), &random_policy::<f64>(1, 5, 2), Domain::Real).unwrap();
    for (a, b) in q.iter().zip(&q64) {
        assert!((*a as f64 - b).abs() < 1e-4);
    }
}

proptest! {
    #[test]
    fn dphi_is_shift_invariant_distribution(raw in prop::collection::vec(0.01f64..1.0, 1..7), q in prop::collection::vec(-5.0f64..5.0, 7), c in -10.0f64..10.0) {
        let z: f64 = raw.iter().sum();
        let omega: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let q = &q[..omega.len()];
        let d = closed_form_dphi(&omega, q).unwrap();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let d2 = closed_form_dphi(&omega, &shifted).unwrap();
        for (a, b) in d.iter().zip(&d2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_chain_holds(raw in prop::collection::vec(0.0f64..1.0, 1..9), q in prop::collection::vec(0.1f64..5.0, 9)) {
        let z: f64 = raw.iter().sum();
        prop_assume!(z > 1e-6);
        let omega: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let q = &q[..omega.len()];
        let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
        let (l, m, r) = logsumexp_bounds(&omega, q, qmin).unwrap();
        prop_assert!(l <= m + 1e-12 && m <= r + 1e-12);
    }
}
