//! Transition storage, offline datasets, replay buffers and state statistics.

mod buffer;
mod covariance;
mod dataset;
mod transition;

pub use buffer::ReplayBuffer;
pub use covariance::{cholesky, state_covariance, StateCovariance, COVARIANCE_RIDGE};
pub use dataset::{collect_dataset, sample_batch, Dataset};
pub use transition::{Transition, TransitionSource};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Domain, Pendulum, PendulumConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64, domain: Domain) -> Transition {
        Transition { s: vec![r], a: vec![0.0], r, s_next: vec![r], done: false, domain }
    }

    #[test]
    fn zero_policy_dataset_contract() {
        let mut env = Pendulum::new(PendulumConfig::default()).unwrap();
        let d = collect_dataset(&mut env, &mut |_| vec![0.0], 1000, 0.1, 3).unwrap();
        assert_eq!(d.len(), 1000);
        assert!(d.transitions.iter().all(|t| t.is_valid() && t.domain == Domain::Real));
    }

    #[test]
    fn noiseless_collection_is_deterministic() {
        let mut policy = |o: &[f64]| vec![-o[1] * 1.5];
        let mut e1 = Pendulum::new(PendulumConfig::default()).unwrap();
        let mut e2 = Pendulum::new(PendulumConfig::default()).unwrap();
        let a = collect_dataset(&mut e1, &mut policy, 500, 0.0, 9).unwrap();
        let b = collect_dataset(&mut e2, &mut policy, 500, 0.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_element_source_repeats() {
        let src = vec![tr(4.0, Domain::Sim)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = sample_batch(&src, 7, &mut rng).unwrap();
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|t| *t == src[0]));
    }

    #[test]
    fn batch_preserves_tags() {
        let src: Vec<Transition> = (0..10).map(|i| tr(i as f64, Domain::Real)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_batch(&src, 64, &mut rng).unwrap().iter().all(|t| t.domain == Domain::Real));
    }

    #[test]
    fn two_element_frequencies() {
        let src = vec![tr(0.0, Domain::Real), tr(1.0, Domain::Real)];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = sample_batch(&src, 100_000, &mut rng).unwrap();
        let ones = b.iter().filter(|t| t.r == 1.0).count() as f64 / 100_000.0;
        assert!((ones - 0.5).abs() < 0.01);
    }

    #[test]
    fn empty_source_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_batch(&Vec::<Transition>::new(), 4, &mut rng).is_err());
    }
}
