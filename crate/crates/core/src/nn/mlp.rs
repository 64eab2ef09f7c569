//! Dense multilayer perceptron with exact reverse-mode gradients.
//!
//! Weights for layer `k` are stored row-major with shape `(fan_in, fan_out)`,
//! so `y[j] = b[j] + sum_i x[i] * w[i * fan_out + j]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Activation applied between hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
}

/// Activation applied to the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `2 * tanh(x)`, a soft clip to `[-2, 2]`.
    Tanh2,
    Softmax,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Tanh2 => "tanh2",
            OutputActivation::Softmax => "softmax",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(OutputActivation::Identity),
            "tanh2" => Some(OutputActivation::Tanh2),
            "softmax" => Some(OutputActivation::Softmax),
            _ => None,
        }
    }
}

/// Weights, biases and activations of a fully connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    layer_sizes: Vec<usize>,
    pub(crate) weights: Vec<Vec<T>>,
    pub(crate) biases: Vec<Vec<T>>,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
}

/// Parameter-shaped container used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        Gradients {
            weights: params.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn num_entries(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Entry by flat index (all weights layer by layer, then all biases).
    pub fn flat(&self, idx: usize) -> T {
        *flat_ref(&self.weights, &self.biases, idx)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn flat_ref<'a, T>(weights: &'a [Vec<T>], biases: &'a [Vec<T>], mut idx: usize) -> &'a T {
    for v in weights.iter().chain(biases) {
        if idx < v.len() {
            return &v[idx];
        }
        idx -= v.len();
    }
    panic!("flat parameter index out of range");
}

fn flat_mut<'a, T>(weights: &'a mut [Vec<T>], biases: &'a mut [Vec<T>], mut idx: usize) -> &'a mut T {
    for v in weights.iter_mut().chain(biases.iter_mut()) {
        if idx < v.len() {
            return &mut v[idx];
        }
        idx -= v.len();
    }
    panic!("flat parameter index out of range");
}

/// Intermediate values of one forward pass, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct Trace<T> {
    /// `acts[0]` is the input, `acts[k + 1]` the activated output of layer `k`.
    acts: Vec<Vec<T>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn new() -> Self {
        Trace { acts: Vec::new(), pre: Vec::new(), delta: Vec::new(), delta_prev: Vec::new() }
    }

    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[T] {
        &self.acts[0]
    }

    /// Pre-activation of the final layer (e.g. logits before softmax or tanh2).
    pub fn output_pre_activation(&self) -> &[T] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Scalar> MlpParams<T> {
    /// Network with all-zero weights and biases.
    pub fn zeros(
        layer_sizes: &[usize],
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::rejected(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let weights = layer_sizes.windows(2).map(|w| vec![T::zero(); w[0] * w[1]]).collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect();
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
        })
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes, hidden_activation, output_activation)?;
        for k in 0..p.num_layers() {
            let bound = 1.0 / (p.layer_sizes[k] as f64).sqrt();
            for w in p.weights[k].iter_mut().chain(p.biases[k].iter_mut()) {
                *w = T::lit(rng.random_range(-bound..=bound));
            }
        }
        Ok(p)
    }

    /// Builds a network from explicit per-layer weights and biases.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<T>>,
        biases: Vec<Vec<T>>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let p = MlpParams { layer_sizes, weights, biases, hidden_activation, output_activation };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.layer_sizes.iter().any(|&k| k == 0) {
            return Err(Error::rejected(format!("invalid layer sizes {:?}", self.layer_sizes)));
        }
        if self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::rejected("layer count does not match layer sizes"));
        }
        for k in 0..n - 1 {
            if self.weights[k].len() != self.layer_sizes[k] * self.layer_sizes[k + 1]
                || self.biases[k].len() != self.layer_sizes[k + 1]
            {
                return Err(Error::rejected(format!("layer {k} shape does not chain")));
            }
        }
        if !self.all_finite() {
            return Err(Error::rejected("non-finite parameter"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [T] {
        &mut self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        &self.biases[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [T] {
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn param(&self, idx: usize) -> T {
        *flat_ref(&self.weights, &self.biases, idx)
    }

    pub fn param_mut(&mut self, idx: usize) -> &mut T {
        flat_mut(&mut self.weights, &mut self.biases, idx)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Layer index that owns the flat parameter `idx`.
    pub fn layer_of(&self, mut idx: usize) -> usize {
        for (k, w) in self.weights.iter().enumerate() {
            if idx < w.len() {
                return k;
            }
            idx -= w.len();
        }
        for (k, b) in self.biases.iter().enumerate() {
            if idx < b.len() {
                return k;
            }
            idx -= b.len();
        }
        panic!("flat parameter index out of range");
    }

    /// `self <- (1 - tau) * self + tau * source`; shapes must match.
    pub fn soft_update_from(&mut self, source: &MlpParams<T>, tau: T) {
        debug_assert_eq!(self.layer_sizes, source.layer_sizes);
        let keep = T::one() - tau;
        for (dst, src) in self.weights.iter_mut().zip(&source.weights) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d = keep * *d + tau * *s);
        }
        for (dst, src) in self.biases.iter_mut().zip(&source.biases) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d = keep * *d + tau * *s);
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let mut trace = Trace::new();
        self.forward_trace(input, &mut trace)?;
        Ok(trace.output().to_vec())
    }

    /// Forward pass that records activations into `trace` for a later backward pass.
    pub fn forward_trace(&self, input: &[T], trace: &mut Trace<T>) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::rejected(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_dim()
            )));
        }
        let nl = self.num_layers();
        trace.acts.resize_with(nl + 1, Vec::new);
        trace.pre.resize_with(nl, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(input);
        for k in 0..nl {
            let (fan_in, fan_out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let w = &self.weights[k];
            let pre = &mut trace.pre[k];
            pre.clear();
            pre.extend_from_slice(&self.biases[k]);
            let x = &trace.acts[k];
            for i in 0..fan_in {
                let xi = x[i];
                if xi == T::zero() {
                    continue;
                }
                let row = &w[i * fan_out..(i + 1) * fan_out];
                for (p, &wij) in pre.iter_mut().zip(row) {
                    *p += xi * wij;
                }
            }
            let out = &mut trace.acts[k + 1];
            out.clear();
            if k + 1 < nl {
                match self.hidden_activation {
                    HiddenActivation::Relu => out.extend(pre.iter().map(|&z| z.max(T::zero()))),
                }
            } else {
                match self.output_activation {
                    OutputActivation::Identity => out.extend_from_slice(pre),
                    OutputActivation::Tanh2 => out.extend(pre.iter().map(|&z| T::lit(2.0) * z.tanh())),
                    OutputActivation::Softmax => out.extend(crate::scalar::softmax(pre)),
                }
            }
        }
        Ok(())
    }

    /// Signs of every hidden ReLU pre-activation, layer by layer.
    pub fn activation_pattern(&self, input: &[T]) -> Result<Vec<bool>> {
        let mut trace = Trace::new();
        self.forward_trace(input, &mut trace)?;
        let hidden = &trace.pre[..self.num_layers() - 1];
        Ok(hidden.iter().flat_map(|z| z.iter().map(|&v| v > T::zero())).collect())
    }

    /// Reverse pass over a recorded trace.
    ///
    /// Accumulates the gradient of `upstream . output` into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward_trace(&self, trace: &mut Trace<T>, upstream: &[T], grads: &mut Gradients<T>) -> Result<Vec<T>> {
        let nl = self.num_layers();
        if trace.acts.len() != nl + 1 || trace.acts[0].len() != self.input_dim() {
            return Err(Error::rejected("trace does not belong to this network"));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::rejected(format!(
                "upstream length {} does not match network output {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let Trace { acts, pre, delta, delta_prev } = trace;

        // Gradient w.r.t. the final pre-activation.
        delta.clear();
        let y = &acts[nl];
        match self.output_activation {
            OutputActivation::Identity => delta.extend_from_slice(upstream),
            OutputActivation::Tanh2 => {
                delta.extend(upstream.iter().zip(y.iter()).map(|(&g, &yo)| {
                    // y = 2 tanh(z)  =>  dy/dz = 2 (1 - tanh^2) = 2 - y^2 / 2
                    g * (T::lit(2.0) - yo * yo * T::lit(0.5))
                }));
            }
            OutputActivation::Softmax => {
                let dot: T = upstream.iter().zip(y.iter()).map(|(&g, &p)| g * p).sum();
                delta.extend(upstream.iter().zip(y.iter()).map(|(&g, &p)| p * (g - dot)));
            }
        }

        for k in (0..nl).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let x = &acts[k];
            let w = &self.weights[k];
            let gw = &mut grads.weights[k];
            for (gb, &d) in grads.biases[k].iter_mut().zip(delta.iter()) {
                *gb += d;
            }
            delta_prev.clear();
            delta_prev.resize(fan_in, T::zero());
            for i in 0..fan_in {
                let row = &w[i * fan_out..(i + 1) * fan_out];
                let grow = &mut gw[i * fan_out..(i + 1) * fan_out];
                let xi = x[i];
                let mut acc = T::zero();
                for j in 0..fan_out {
                    let d = delta[j];
                    grow[j] += xi * d;
                    acc += row[j] * d;
                }
                delta_prev[i] = acc;
            }
            if k > 0 {
                match self.hidden_activation {
                    HiddenActivation::Relu => {
                        for (dp, &z) in delta_prev.iter_mut().zip(pre[k - 1].iter()) {
                            if z <= T::zero() {
                                *dp = T::zero();
                            }
                        }
                    }
                }
            }
            std::mem::swap(delta, delta_prev);
        }
        Ok(delta.clone())
    }

    /// Exact gradients of `upstream . forward(input)` with respect to every parameter and the input.
    pub fn backward(&self, input: &[T], upstream: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
        let mut trace = Trace::new();
        self.forward_trace(input, &mut trace)?;
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_trace(&mut trace, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Bitwise fingerprint of all parameters, for change detection.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.layer_sizes.hash(&mut h);
        for v in self.weights.iter().chain(&self.biases) {
            for x in v {
                x.to_f64().unwrap_or(f64::NAN).to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_collapse_to_output_activation_of_bias() {
        let mut p = MlpParams::<f64>::zeros(&[3, 4, 2], HiddenActivation::Relu, OutputActivation::Tanh2).unwrap();
        p.biases_mut(1).copy_from_slice(&[0.3, -1.2]);
        let y = p.forward(&[5.0, -1.0, 2.0]).unwrap();
        assert_eq!(y, vec![2.0 * 0.3_f64.tanh(), 2.0 * (-1.2_f64).tanh()]);

        let mut s = MlpParams::<f64>::zeros(&[2, 3], HiddenActivation::Relu, OutputActivation::Softmax).unwrap();
        s.biases_mut(0).copy_from_slice(&[0.0, 0.0, 0.0]);
        let y = s.forward(&[1.0, 2.0]).unwrap();
        for v in y {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_linear_layer() {
        let p = MlpParams::from_parts(
            vec![1, 1],
            vec![vec![2.0_f64]],
            vec![vec![1.0]],
            HiddenActivation::Relu,
            OutputActivation::Identity,
        )
        .unwrap();
        assert_eq!(p.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn linear_layer_gradient() {
        let p = MlpParams::from_parts(
            vec![2, 1],
            vec![vec![0.5_f64, -1.5]],
            vec![vec![0.25]],
            HiddenActivation::Relu,
            OutputActivation::Identity,
        )
        .unwrap();
        let (g, gx) = p.backward(&[3.0, -4.0], &[1.0]).unwrap();
        assert_eq!(g.weights[0], vec![3.0, -4.0]);
        assert_eq!(g.biases[0], vec![1.0]);
        assert_eq!(gx, vec![0.5, -1.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MlpParams::<f64>::init(&[4, 8, 8, 3], HiddenActivation::Relu, OutputActivation::Softmax, &mut rng)
            .unwrap();
        let (g, gx) = p.backward(&[0.1, 0.2, -0.3, 0.4], &[0.0, 0.0, 0.0]).unwrap();
        assert!(g.weights.iter().chain(&g.biases).all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(gx.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = MlpParams::<f64>::zeros(&[3, 2], HiddenActivation::Relu, OutputActivation::Identity).unwrap();
        assert!(matches!(p.forward(&[1.0]), Err(Error::RejectedInput(_))));
        assert!(matches!(p.backward(&[1.0, 2.0, 3.0], &[1.0]), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = MlpParams::<f64>::init(&[16, 4], HiddenActivation::Relu, OutputActivation::Identity, &mut rng).unwrap();
        assert!(p.weights(0).iter().all(|w| w.abs() <= 0.25));
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::<f32>::init(&[2, 5, 1], HiddenActivation::Relu, OutputActivation::Identity, &mut rng).unwrap();
        let (g, _) = p.backward(&[0.5, -0.5], &[1.0]).unwrap();
        assert!(g.all_finite());
    }
}
