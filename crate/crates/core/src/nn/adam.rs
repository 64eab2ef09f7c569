use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Optimizer moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Gradients<T>,
    pub second_moment: Gradients<T>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &MlpParams<T>, config: AdamConfig) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(params),
            second_moment: Gradients::zeros_like(params),
            step_count: 0,
            config,
        }
    }
}

#[inline]
fn update_slice<T: Scalar>(p: &mut [T], g: &[T], m: &mut [T], v: &mut [T], c: &AdamConfig, t: u64) {
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let bc1 = T::one() - b1.powi(t as i32);
    let bc2 = T::one() - b2.powi(t as i32);
    let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (T::one() - b1) * g[i];
        v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        p[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Rejects the whole step (leaving params and state untouched) if any gradient
/// entry is non-finite.
pub fn adam_step<T: Scalar>(params: &mut MlpParams<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
    if grads.weights.len() != params.num_layers() || grads.biases.len() != params.num_layers() {
        return Err(Error::rejected("gradient layer count does not match parameters"));
    }
    for k in 0..params.num_layers() {
        if grads.weights[k].len() != params.weights[k].len() || grads.biases[k].len() != params.biases[k].len() {
            return Err(Error::rejected(format!("gradient shape mismatch in layer {k}")));
        }
        if grads.weights[k].iter().chain(&grads.biases[k]).any(|g| !g.is_finite()) {
            return Err(Error::PoisonedGradient { layer: k });
        }
    }
    state.step_count += 1;
    let t = state.step_count;
    for k in 0..params.num_layers() {
        update_slice(
            &mut params.weights[k],
            &grads.weights[k],
            &mut state.first_moment.weights[k],
            &mut state.second_moment.weights[k],
            &state.config,
            t,
        );
        update_slice(
            &mut params.biases[k],
            &grads.biases[k],
            &mut state.first_moment.biases[k],
            &mut state.second_moment.biases[k],
            &state.config,
            t,
        );
    }
    Ok(())
}

/// Adam on a single scalar parameter (used for the log-temperature).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarAdam<T> {
    m: T,
    v: T,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> ScalarAdam<T> {
    pub fn new(config: AdamConfig) -> Self {
        ScalarAdam { m: T::zero(), v: T::zero(), step_count: 0, config }
    }

    pub fn step(&mut self, param: &mut T, grad: T) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::PoisonedGradient { layer: 0 });
        }
        self.step_count += 1;
        let mut p = [*param];
        let mut m = [self.m];
        let mut v = [self.v];
        update_slice(&mut p, &[grad], &mut m, &mut v, &self.config, self.step_count);
        *param = p[0];
        self.m = m[0];
        self.v = v[0];
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{HiddenActivation, OutputActivation};

    fn scalar_net(w: f64) -> MlpParams<f64> {
        MlpParams::from_parts(vec![1, 1], vec![vec![w]], vec![vec![0.0]], HiddenActivation::Relu, OutputActivation::Identity)
            .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = scalar_net(0.7);
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        for g0 in [0.3, -5.0, 1e3] {
            let mut p = scalar_net(1.0);
            let mut st = AdamState::new(&p, AdamConfig::default());
            let mut g = Gradients::zeros_like(&p);
            g.weights[0][0] = g0;
            adam_step(&mut p, &g, &mut st).unwrap();
            let moved = (p.weights(0)[0] - 1.0).abs();
            let expect = 3e-4 * g0.abs() / (g0.abs() + 1e-8);
            assert!((moved - expect).abs() < 1e-15, "{moved} vs {expect}");
        }
    }

    #[test]
    fn quadratic_descent_is_monotone() {
        // f(w) = w^2, gradient 2w.
        let mut p = scalar_net(1.0);
        let mut st = AdamState::new(&p, AdamConfig::with_lr(0.1));
        let mut last = 1.0_f64;
        for _ in 0..10 {
            let mut g = Gradients::zeros_like(&p);
            g.weights[0][0] = 2.0 * p.weights(0)[0];
            adam_step(&mut p, &g, &mut st).unwrap();
            let w = p.weights(0)[0].abs();
            assert!(w < last, "{w} !< {last}");
            last = w;
        }
    }

    #[test]
    fn poisoned_gradient_names_layer() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut p = MlpParams::<f64>::init(&[2, 3, 1], HiddenActivation::Relu, OutputActivation::Identity, &mut rng).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let mut g = Gradients::zeros_like(&p);
        g.biases[1][0] = f64::NAN;
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(Error::PoisonedGradient { layer: 1 })));
        assert_eq!(p, before);
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn scalar_adam_matches_network_adam() {
        let mut p = scalar_net(0.5);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let mut x = 0.5_f64;
        let mut sa = ScalarAdam::new(AdamConfig::default());
        for i in 0..5 {
            let gv = 0.1 * (i as f64 + 1.0);
            let mut g = Gradients::zeros_like(&p);
            g.weights[0][0] = gv;
            adam_step(&mut p, &g, &mut st).unwrap();
            sa.step(&mut x, gv).unwrap();
        }
        assert_eq!(x, p.weights(0)[0]);
    }
}
