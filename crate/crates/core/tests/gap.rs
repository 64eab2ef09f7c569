use h2o_core::data::{state_covariance, StateCovariance, Transition};
use h2o_core::envs::Domain;
use h2o_core::error::Result;
use h2o_core::gap::*;
use h2o_core::nn::{grad_check, AdamConfig, HiddenActivation, MlpParams, OutputActivation, FD_STEP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct ConstantLogRatio(f64);

impl DynamicsRatio for ConstantLogRatio {
    fn log_ratio_sim_over_real(&self, _: &[f64], _: &[f64], _: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Two unit-variance Gaussians over a 1-d next state.
struct GaussianPairRatio {
    mean_sim: f64,
    mean_real: f64,
}

impl DynamicsRatio for GaussianPairRatio {
    fn log_ratio_sim_over_real(&self, _: &[f64], _: &[f64], x: &[f64]) -> Result<f64> {
        Ok(-0.5 * (x[0] - self.mean_sim).powi(2) + 0.5 * (x[0] - self.mean_real).powi(2))
    }
}

fn transition(s: Vec<f64>, a: Vec<f64>, s_next: Vec<f64>, domain: Domain) -> Transition {
    Transition { s, a, r: 0.0, s_next, done: false, domain }
}

fn constant_net(input: usize, hidden: usize, out: [f64; 2]) -> MlpParams<f64> {
    let mut p = MlpParams::zeros(&[input, hidden, 2], HiddenActivation::Relu, OutputActivation::Tanh2).unwrap();
    p.biases_mut(1)[0] = (out[0] / 2.0).atanh();
    p.biases_mut(1)[1] = (out[1] / 2.0).atanh();
    p
}

fn unit_cov(d: usize) -> StateCovariance {
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = 1.0;
    }
    StateCovariance::from_parts(vec![0.0; d], cov, 0.0).unwrap()
}

#[test]
fn fresh_pair_is_uninformative() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pair = DiscriminatorPair::new(3, 1, 16, AdamConfig::default(), &mut rng).unwrap();
    let p = discriminator_probs(&pair, &[0.1, 0.2, 0.3], &[1.0], &[0.0, 1.0, -2.0]).unwrap();
    assert_eq!(p, DiscriminatorProbs { p_real_sas: 0.5, p_real_sa: 0.5 });
    assert_eq!(dynamics_ratio(&pair, &[0.1, 0.2, 0.3], &[1.0], &[0.0, 1.0, -2.0]).unwrap(), 1.0);
    assert_eq!(darc_reward_correction(&pair, &[0.0; 3], &[0.0], &[0.0; 3]).unwrap(), 0.0);
}

#[test]
fn coupling_adds_sa_logits() {
    let pair = DiscriminatorPair::from_networks(constant_net(2, 4, [1.0, -1.0]), constant_net(3, 4, [0.0, 0.0]), 1, 1, AdamConfig::default());
    let p = discriminator_probs(&pair, &[0.3], &[0.1], &[0.2]).unwrap();
    let sigma2 = 1.0 / (1.0 + (-2.0_f64).exp());
    assert!((p.p_real_sas - sigma2).abs() < 1e-12);
    assert!((p.p_real_sas - 0.8808).abs() < 1e-4);
}

#[test]
fn dimension_mismatch_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pair = DiscriminatorPair::new(3, 1, 8, AdamConfig::default(), &mut rng).unwrap();
    assert!(discriminator_probs(&pair, &[0.0; 2], &[0.0], &[0.0; 3]).is_err());
    assert!(pair.log_ratio(&[0.0; 3], &[0.0, 0.0], &[0.0; 3]).is_err());
}

#[test]
fn initial_losses_are_ln2() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = DiscriminatorPair::new(3, 1, 16, AdamConfig::default(), &mut rng).unwrap();
    let mk = |d| (0..10).map(|i| transition(vec![i as f64, 0.0, 1.0], vec![0.5], vec![0.0, -1.0, i as f64], d)).collect::<Vec<_>>();
    let (ls, la) = pair.losses(&mk(Domain::Real), &mk(Domain::Sim)).unwrap();
    assert!((ls - 2.0_f64.ln()).abs() < 1e-6 && (la - 2.0_f64.ln()).abs() < 1e-6);
}

#[test]
fn empty_batches_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pair = DiscriminatorPair::new(1, 1, 4, AdamConfig::default(), &mut rng).unwrap();
    let one = vec![transition(vec![0.0], vec![0.0], vec![0.0], Domain::Real)];
    assert!(pair.train_step(&[], &one).is_err());
    assert!(pair.train_step(&one, &[]).is_err());
}

#[test]
fn ratio_arithmetic() {
    assert_eq!(ratio_from_probs(0.5, 0.5), 1.0);
    assert!((ratio_from_probs(0.8, 0.5) - 0.25).abs() < 1e-15);
    assert!((ratio_from_probs(0.2, 0.5) - 4.0).abs() < 1e-12);
    assert_eq!(importance_weight_from_log_ratio(0.25_f64.ln()), 1.0);
    assert!((importance_weight_from_log_ratio(4.0_f64.ln()) - 0.25).abs() < 1e-15);
    assert_eq!(importance_weight_from_log_ratio(50.0), WEIGHT_MIN);
}

#[test]
fn darc_correction_values() {
    let dr = darc_reward_correction(&ConstantLogRatio(4.0_f64.ln()), &[], &[], &[]).unwrap();
    assert!((dr + 1.3862943611198906).abs() < 1e-12);
    assert_eq!(darc_reward_correction(&ConstantLogRatio(-40.0), &[], &[], &[]).unwrap(), 10.0);
    assert_eq!(darc_reward_correction(&ConstantLogRatio(40.0), &[], &[], &[]).unwrap(), -10.0);
}

#[test]
fn u_floor_and_ceiling() {
    let cov = unit_cov(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(gap_measure_u(&ConstantLogRatio(0.0), &[0.0; 2], &[0.0], &[0.0; 2], &cov, 10, &mut rng).unwrap(), U_MIN);
    assert_eq!(gap_measure_u(&ConstantLogRatio(1.0), &[0.0; 2], &[0.0], &[0.0; 2], &cov, 10, &mut rng).unwrap(), 10.0);
    assert!(gap_measure_u(&ConstantLogRatio(1.0), &[0.0; 2], &[0.0], &[0.0; 2], &cov, 0, &mut rng).is_err());
}

#[test]
fn u_is_a_sum_over_the_seeded_draws() {
    let model = GaussianPairRatio { mean_sim: 0.3, mean_real: 0.0 };
    let cov = unit_cov(1);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let u10 = gap_measure_u(&model, &[0.0], &[0.0], &[0.5], &cov, 10, &mut rng).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let singles: f64 = (0..10)
        .map(|_| {
            let x = cov.sample_around(&[0.5], &mut rng);
            model.log_ratio_sim_over_real(&[], &[], &x).unwrap()
        })
        .sum();
    assert_eq!(u10, clip_u(singles));
}

#[test]
fn omega_examples() {
    assert_eq!(batch_omega(&[1.0; 4]).unwrap(), vec![0.25; 4]);
    assert_eq!(batch_omega(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
    assert!(batch_omega(&[]).is_err());
    assert!(batch_omega(&[0.0, 1.0]).is_err());
}

#[test]
fn coupling_is_live() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pair = DiscriminatorPair::new(2, 1, 8, AdamConfig::default(), &mut rng).unwrap();
    for net in [&mut pair.d_sa, &mut pair.d_sas] {
        net.weights_mut(1).iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
    }
    let (s, a, sn) = ([0.4, -0.2], [0.7], [0.1, 0.9]);
    let base = discriminator_probs(&pair, &s, &a, &sn).unwrap().p_real_sas;
    let mut moved = 0;
    for i in 0..pair.d_sa.num_params() {
        let mut p = pair.clone();
        *p.d_sa.param_mut(i) += 1e-4;
        let q = discriminator_probs(&p, &s, &a, &sn).unwrap().p_real_sas;
        assert!(q.is_finite());
        if (q - base).abs() > 0.0 {
            moved += 1;
        }
    }
    assert!(moved > 0);
    // The output-layer biases always feed straight through.
    let mut p = pair.clone();
    p.d_sa.biases_mut(1)[0] += 1e-3;
    assert!(discriminator_probs(&p, &s, &a, &sn).unwrap().p_real_sas > base);
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pair = DiscriminatorPair::new(3, 1, 8, AdamConfig::default(), &mut rng).unwrap();
        for net in [&mut pair.d_sa, &mut pair.d_sas] {
            net.weights_mut(1).iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
        }
        let mut batch = |d| {
            (0..4)
                .map(|_| {
                    let v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
                    transition(v[..3].to_vec(), v[3..4].to_vec(), v[4..].to_vec(), d)
                })
                .collect::<Vec<_>>()
        };
        let (real, sim) = (batch(Domain::Real), batch(Domain::Sim));
        let (_, _, g_sas, g_sa) = pair.loss_and_grad(&real, &sim).unwrap();
        let mut check_rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let p0 = pair.clone();
        let err = grad_check(&pair.d_sas, &g_sas, |p| {
            let mut q = p0.clone();
            q.d_sas = p.clone();
            q.losses(&real, &sim).unwrap().0
        }, usize::MAX, FD_STEP, &mut check_rng);
        assert!(err < 1e-4, "sas err {err}");
        let err = grad_check(&pair.d_sa, &g_sa, |p| {
            let mut q = p0.clone();
            q.d_sa = p.clone();
            let (a, b) = q.losses(&real, &sim).unwrap();
            a + b
        }, usize::MAX, FD_STEP, &mut check_rng);
        assert!(err < 1e-4, "sa err {err}");
    }
}

#[test]
fn identical_domains_stay_near_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pair = DiscriminatorPair::new(2, 1, 16, AdamConfig::with_lr(1e-3), &mut rng).unwrap();
    let draw = |rng: &mut ChaCha8Rng, d| {
        (0..64)
            .map(|_| {
                let s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let a = vec![rng.random_range(-1.0..1.0)];
                let sn = vec![s[0] + a[0] * 0.1 + rng.random_range(-0.1..0.1), s[1]];
                transition(s, a, sn, d)
            })
            .collect::<Vec<_>>()
    };
    for _ in 0..500 {
        let real = draw(&mut rng, Domain::Real);
        let mut sim = real.clone();
        sim.iter_mut().for_each(|t| t.domain = Domain::Sim);
        pair.train_step(&real, &sim).unwrap();
    }
    for t in draw(&mut rng, Domain::Real) {
        let p = discriminator_probs(&pair, &t.s, &t.a, &t.s_next).unwrap();
        assert!((p.p_real_sas - 0.5).abs() < 0.05 && (p.p_real_sa - 0.5).abs() < 0.05, "{p:?}");
    }
}

#[test]
fn separable_domains_are_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pair = DiscriminatorPair::new(2, 1, 16, AdamConfig::with_lr(1e-3), &mut rng).unwrap();
    // Real transitions move right, simulated ones move left.
    let draw = |rng: &mut ChaCha8Rng, d: Domain, n: usize| {
        (0..n)
            .map(|_| {
                let s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let a = vec![rng.random_range(-1.0..1.0)];
                let step = if d == Domain::Real { 0.5 } else { -0.5 };
                let sn = vec![s[0] + step + rng.random_range(-0.2..0.2), s[1]];
                transition(s, a, sn, d)
            })
            .collect::<Vec<_>>()
    };
    for _ in 0..2000 {
        let (r, s) = (draw(&mut rng, Domain::Real, 32), draw(&mut rng, Domain::Sim, 32));
        pair.train_step(&r, &s).unwrap();
    }
    let probe: Vec<_> = draw(&mut rng, Domain::Real, 200).into_iter().chain(draw(&mut rng, Domain::Sim, 200)).collect();
    let correct = probe
        .iter()
        .filter(|t| {
            let p = discriminator_probs(&pair, &t.s, &t.a, &t.s_next).unwrap().p_real_sas;
            (p > 0.5) == (t.domain == Domain::Real)
        })
        .count();
    assert!(correct as f64 / probe.len() as f64 > 0.95, "{correct}");
}

#[test]
fn reverse_measure_floor_and_positive() {
    let model = GaussianDynamicsModel::from_parts(1, 1, vec![0.0, 0.0, 0.0], vec![1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    assert_eq!(gap_measure_u_reverse(&model, &ConstantLogRatio(0.0), &[0.0], &[0.0], 10, &mut rng).unwrap(), U_MIN);
    // Real next states ~ N(0, 1), simulator ~ N(3, 1).
    let ratio = GaussianPairRatio { mean_sim: 3.0, mean_real: 0.0 };
    let u = gap_measure_u_reverse(&model, &ratio, &[0.0], &[0.0], 1, &mut rng).unwrap();
    assert!(u > U_MIN);
    let unfitted = GaussianDynamicsModel::unfitted(1, 1);
    assert!(gap_measure_u_reverse(&unfitted, &ratio, &[0.0], &[0.0], 10, &mut rng).is_err());
}

#[test]
fn reverse_measure_is_seeded() {
    let model = GaussianDynamicsModel::from_parts(1, 1, vec![0.5, 0.1, 0.0], vec![0.3]).unwrap();
    let ratio = GaussianPairRatio { mean_sim: 1.0, mean_real: 0.0 };
    let a = gap_measure_u_reverse(&model, &ratio, &[0.2], &[0.4], 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = gap_measure_u_reverse(&model, &ratio, &[0.2], &[0.4], 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dynamics_model_recovers_linear_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let data: Vec<_> = (0..2000)
        .map(|_| {
            let s = vec![rng.random_range(-1.0..1.0)];
            let a = vec![rng.random_range(-1.0..1.0)];
            let sn = vec![0.9 * s[0] + 0.5 * a[0] + 0.2 + noise.sample(&mut rng)];
            transition(s, a, sn, Domain::Real)
        })
        .collect();
    let mut m = GaussianDynamicsModel::unfitted(1, 1);
    m.fit(&data, 1e-6).unwrap();
    assert!((m.weights[0] - 0.9).abs() < 0.02 && (m.weights[1] - 0.5).abs() < 0.02 && (m.weights[2] - 0.2).abs() < 0.02);
    assert!((m.variance[0] - 0.01).abs() < 0.002);
}

#[test]
fn batch_estimate_is_distribution() {
    let data: Vec<_> = (0..5).map(|i| transition(vec![i as f64], vec![0.0], vec![i as f64 * 0.5], Domain::Sim)).collect();
    let cov = state_covariance(&data).unwrap();
    let model = GaussianPairRatio { mean_sim: 1.0, mean_real: 0.0 };
    let est = GapEstimate::for_batch(&model, &data, &cov, 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!((est.omega.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!(est.u.iter().all(|&u| (U_MIN..=U_MAX).contains(&u)));
}

proptest! {
    #[test]
    fn omega_is_a_permutation_equivariant_distribution(u in prop::collection::vec(1e-45f64..10.0, 1..64), rot in 0usize..64) {
        let w = batch_omega(&u).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        let k = rot % u.len();
        let mut ur = u.clone();
        ur.rotate_left(k);
        let mut wr = w.clone();
        wr.rotate_left(k);
        let w2 = batch_omega(&ur).unwrap();
        // Reordering the normalizing sum moves it by at most n ulps.
        let tol = 2.0 * u.len() as f64 * f64::EPSILON;
        for (a, b) in w2.iter().zip(&wr) {
            prop_assert!((a - b).abs() <= tol * a.abs() + 1e-300);
        }
    }

    #[test]
    fn u_is_clipped(log_ratio in -20.0f64..20.0, n in 1usize..12, seed in 0u64..1000) {
        let cov = unit_cov(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gap_measure_u(&ConstantLogRatio(log_ratio), &[0.0; 2], &[0.0], &[0.0; 2], &cov, n, &mut rng).unwrap();
        prop_assert!((U_MIN..=U_MAX).contains(&u));
    }

    #[test]
    fn raw_transition_logits_stay_in_range(seed in 0u64..500, x in prop::collection::vec(-50.0f64..50.0, 7)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pair = DiscriminatorPair::new(3, 1, 8, AdamConfig::default(), &mut rng).unwrap();
        for net in [&mut pair.d_sa, &mut pair.d_sas] {
            net.weights_mut(1).iter_mut().for_each(|w| *w = rng.random_range(-3.0..3.0));
        }
        let l = pair.logits(&x[..3], &x[3..4], &x[4..]).unwrap();
        prop_assert!(l.sas.iter().all(|v| (-2.0..=2.0).contains(v)));
        let p = l.probs();
        prop_assert!(p.p_real_sas > 0.0 && p.p_real_sas < 1.0 && p.p_real_sa > 0.0 && p.p_real_sa < 1.0);
    }
}
