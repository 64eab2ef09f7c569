use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::transition::TransitionSource;
use crate::error::{Error, Result};

/// Ridge added to the sample covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// State mean and covariance of a real dataset, with a Cholesky factor for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct StateCovariance {
    pub mean: Vec<f64>,
    /// Row-major `d x d` unbiased sample covariance.
    pub cov: Vec<f64>,
    /// `cov + ridge * I`.
    pub regularized_cov: Vec<f64>,
    /// Lower-triangular factor of `regularized_cov`.
    chol: Vec<f64>,
}

/// Lower-triangular `L` with `L L^T = a` for a row-major SPD matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::rejected("matrix is not positive definite"));
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

impl StateCovariance {
    pub fn from_parts(mean: Vec<f64>, cov: Vec<f64>, ridge: f64) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::rejected("covariance shape does not match mean"));
        }
        let mut regularized_cov = cov.clone();
        for i in 0..d {
            regularized_cov[i * d + i] += ridge;
        }
        let chol = cholesky(&regularized_cov, d)?;
        Ok(StateCovariance { mean, cov, regularized_cov, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One draw from `Normal(center, regularized_cov)`.
    pub fn sample_around<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        (0..d)
            .map(|i| center[i] + (0..=i).map(|k| self.chol[i * d + k] * z[k]).sum::<f64>())
            .collect()
    }
}

/// Sample mean and unbiased covariance of the `s` fields, ridge `1e-6`.
pub fn state_covariance<S: TransitionSource + ?Sized>(dataset: &S) -> Result<StateCovariance> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::rejected("state covariance of an empty dataset"));
    }
    let d = dataset.get(0).s.len();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(&dataset.get(i).s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    if n > 1 {
        for i in 0..n {
            let s = &dataset.get(i).s;
            for a in 0..d {
                let da = s[a] - mean[a];
                for b in 0..d {
                    cov[a * d + b] += da * (s[b] - mean[b]);
                }
            }
        }
        cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    }
    StateCovariance::from_parts(mean, cov, COVARIANCE_RIDGE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Transition;
    use crate::envs::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_states(states: Vec<Vec<f64>>) -> Vec<Transition> {
        states
            .into_iter()
            .map(|s| Transition { s_next: s.clone(), s, a: vec![0.0], r: 0.0, done: false, domain: Domain::Real })
            .collect()
    }

    #[test]
    fn identical_states_give_ridge_only() {
        let c = state_covariance(&with_states(vec![vec![1.0, 2.0]; 5])).unwrap();
        assert!(c.cov.iter().all(|&x| x == 0.0));
        assert_eq!(c.regularized_cov, vec![1e-6, 0.0, 0.0, 1e-6]);
    }

    #[test]
    fn two_point_variance() {
        let c = state_covariance(&with_states(vec![vec![0.0, 0.0], vec![2.0, 0.0]])).unwrap();
        assert_eq!(c.cov, vec![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.mean, vec![1.0, 0.0]);
    }

    #[test]
    fn standard_normal_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let states = (0..10_000).map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let c = state_covariance(&with_states(states)).unwrap();
        for i in 0..3 {
            assert!((c.cov[i * 3 + i] - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(state_covariance(&Vec::<Transition>::new()).is_err());
    }

    #[test]
    fn samples_have_requested_covariance() {
        let c = StateCovariance::from_parts(vec![0.0, 0.0], vec![4.0, 1.0, 1.0, 1.0], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = c.sample_around(&[0.0, 0.0], &mut rng);
            sxx += v[0] * v[0];
            sxy += v[0] * v[1];
            syy += v[1] * v[1];
        }
        let n = n as f64;
        assert!((sxx / n - 4.0).abs() < 0.1 && (sxy / n - 1.0).abs() < 0.05 && (syy / n - 1.0).abs() < 0.03);
    }
}
