//! Coupled real-vs-sim classifiers over `(s, a)` and `(s, a, s')`.
//!
//! Class 0 is "real", class 1 is "sim". Both networks end in a `2 tanh` soft clip.
//! The `(s, a, s')` head classifies with `softmax(l_sas + l_sa)`, so the `(s, a)`
//! network also receives gradient from the transition loss.

use rand::Rng;

use crate::data::Transition;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, Gradients, HiddenActivation, MlpParams, OutputActivation, Trace};
use crate::scalar::softmax;

pub const REAL: usize = 0;
pub const SIM: usize = 1;

/// Per-dimension affine standardization of observations, `(x - shift) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and standard deviation of the states in `transitions`; zero-variance dims keep scale 1.
    pub fn fit(transitions: &[Transition]) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::rejected("cannot fit a standardizer on no data"));
        }
        let d = transitions[0].s.len();
        let n = transitions.len() as f64;
        let mut shift = vec![0.0; d];
        for t in transitions {
            shift.iter_mut().zip(&t.s).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; d];
        for t in transitions {
            var.iter_mut().zip(t.s.iter().zip(&shift)).for_each(|(v, (x, m))| *v += (x - m) * (x - m) / n);
        }
        let scale = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { shift, scale })
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(x.iter().zip(self.shift.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorPair {
    pub d_sa: MlpParams<f64>,
    pub d_sas: MlpParams<f64>,
    pub adam_sa: AdamState<f64>,
    pub adam_sas: AdamState<f64>,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Applied to `s` and `s'` before both networks when present.
    pub standardizer: Option<Standardizer>,
}

/// Probability of the "real" class from each head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorProbs {
    pub p_real_sas: f64,
    pub p_real_sa: f64,
}

/// Raw head outputs for one `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorLogits {
    /// `d_sa` output after the soft clip.
    pub sa: [f64; 2],
    /// `d_sas` output after the soft clip, before adding `sa`.
    pub sas: [f64; 2],
}

impl DiscriminatorLogits {
    pub fn probs(&self) -> DiscriminatorProbs {
        let p_sa = softmax(&self.sa);
        let p_sas = softmax(&[self.sas[0] + self.sa[0], self.sas[1] + self.sa[1]]);
        DiscriminatorProbs { p_real_sas: p_sas[REAL], p_real_sa: p_sa[REAL] }
    }

    /// `log [P_sim(s'|s,a) / P_real(s'|s,a)]`; the `d_sa` logits cancel exactly.
    pub fn log_ratio_sim_over_real(&self) -> f64 {
        self.sas[SIM] - self.sas[REAL]
    }
}

impl DiscriminatorPair {
    /// One hidden layer of `hidden` ReLU units per network. Hidden layers use the
    /// default uniform init; output layers start at zero so both heads begin at 0.5.
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: usize, adam: AdamConfig, rng: &mut R) -> Result<Self> {
        let mut d_sa = MlpParams::init(&[state_dim + action_dim, hidden, 2], HiddenActivation::Relu, OutputActivation::Tanh2, rng)?;
        let mut d_sas =
            MlpParams::init(&[2 * state_dim + action_dim, hidden, 2], HiddenActivation::Relu, OutputActivation::Tanh2, rng)?;
        for net in [&mut d_sa, &mut d_sas] {
            net.weights_mut(1).fill(0.0);
            net.biases_mut(1).fill(0.0);
        }
        Ok(Self::from_networks(d_sa, d_sas, state_dim, action_dim, adam))
    }

    pub fn from_networks(d_sa: MlpParams<f64>, d_sas: MlpParams<f64>, state_dim: usize, action_dim: usize, adam: AdamConfig) -> Self {
        DiscriminatorPair {
            adam_sa: AdamState::new(&d_sa, adam),
            adam_sas: AdamState::new(&d_sas, adam),
            d_sa,
            d_sas,
            state_dim,
            action_dim,
            standardizer: None,
        }
    }

    fn check_dims(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<()> {
        if s.len() != self.state_dim || s_next.len() != self.state_dim || a.len() != self.action_dim {
            return Err(Error::rejected(format!(
                "discriminator expects |s|={} |a|={}, got {} {} {}",
                self.state_dim,
                self.action_dim,
                s.len(),
                a.len(),
                s_next.len()
            )));
        }
        Ok(())
    }

    fn inputs(&self, s: &[f64], a: &[f64], s_next: &[f64], sa: &mut Vec<f64>, sas: &mut Vec<f64>) {
        sa.clear();
        match &self.standardizer {
            Some(st) => st.apply(s, sa),
            None => sa.extend_from_slice(s),
        }
        sa.extend_from_slice(a);
        sas.clear();
        sas.extend_from_slice(sa);
        match &self.standardizer {
            Some(st) => st.apply(s_next, sas),
            None => sas.extend_from_slice(s_next),
        }
    }

    pub fn logits(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<DiscriminatorLogits> {
        self.check_dims(s, a, s_next)?;
        let (mut sa, mut sas) = (Vec::new(), Vec::new());
        self.inputs(s, a, s_next, &mut sa, &mut sas);
        let l_sa = self.d_sa.forward(&sa)?;
        let l_sas = self.d_sas.forward(&sas)?;
        Ok(DiscriminatorLogits { sa: [l_sa[0], l_sa[1]], sas: [l_sas[0], l_sas[1]] })
    }

    /// Log sim/real ratio of `P(s'|s,a)`; only the transition head is evaluated.
    pub fn log_ratio(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
        self.check_dims(s, a, s_next)?;
        let (mut sa, mut sas) = (Vec::new(), Vec::new());
        self.inputs(s, a, s_next, &mut sa, &mut sas);
        let l = self.d_sas.forward(&sas)?;
        Ok(l[SIM] - l[REAL])
    }

    /// Mean cross-entropy of both heads over labeled batches, without updating.
    pub fn losses(&self, real_batch: &[Transition], sim_batch: &[Transition]) -> Result<(f64, f64)> {
        let (ls, la, _, _) = self.loss_and_grad(real_batch, sim_batch)?;
        Ok((ls, la))
    }

    /// `(loss_sas, loss_sa, grad_sas, grad_sa)`. `grad_sa` includes the coupling path.
    pub fn loss_and_grad(
        &self,
        real_batch: &[Transition],
        sim_batch: &[Transition],
    ) -> Result<(f64, f64, Gradients<f64>, Gradients<f64>)> {
        if real_batch.is_empty() || sim_batch.is_empty() {
            return Err(Error::rejected("discriminator training needs non-empty real and sim batches"));
        }
        let mut g_sa = Gradients::zeros_like(&self.d_sa);
        let mut g_sas = Gradients::zeros_like(&self.d_sas);
        let (mut tr_sa, mut tr_sas) = (Trace::new(), Trace::new());
        let (mut sa, mut sas) = (Vec::new(), Vec::new());
        let (mut loss_sa, mut loss_sas) = (0.0, 0.0);
        let n = (real_batch.len() + sim_batch.len()) as f64;
        let labeled = real_batch.iter().map(|t| (t, REAL)).chain(sim_batch.iter().map(|t| (t, SIM)));
        for (t, label) in labeled {
            self.check_dims(&t.s, &t.a, &t.s_next)?;
            self.inputs(&t.s, &t.a, &t.s_next, &mut sa, &mut sas);
            self.d_sa.forward_trace(&sa, &mut tr_sa)?;
            self.d_sas.forward_trace(&sas, &mut tr_sas)?;
            let l_sa = [tr_sa.output()[0], tr_sa.output()[1]];
            let l_sas = [tr_sas.output()[0], tr_sas.output()[1]];
            let p_sa = softmax(&l_sa);
            let p_sas = softmax(&[l_sas[0] + l_sa[0], l_sas[1] + l_sa[1]]);
            loss_sa -= p_sa[label].ln() / n;
            loss_sas -= p_sas[label].ln() / n;
            let onehot = |k: usize| if k == label { 1.0 } else { 0.0 };
            let d_sas: Vec<f64> = (0..2).map(|k| (p_sas[k] - onehot(k)) / n).collect();
            let d_sa: Vec<f64> = (0..2).map(|k| (p_sa[k] - onehot(k)) / n + d_sas[k]).collect();
            self.d_sas.backward_trace(&mut tr_sas, &d_sas, &mut g_sas)?;
            self.d_sa.backward_trace(&mut tr_sa, &d_sa, &mut g_sa)?;
        }
        Ok((loss_sas, loss_sa, g_sas, g_sa))
    }

    /// One Adam step on both heads. Returns the pre-update `(loss_sas, loss_sa)`.
    pub fn train_step(&mut self, real_batch: &[Transition], sim_batch: &[Transition]) -> Result<(f64, f64)> {
        let (ls, la, g_sas, g_sa) = self.loss_and_grad(real_batch, sim_batch)?;
        adam_step(&mut self.d_sas, &g_sas, &mut self.adam_sas)?;
        adam_step(&mut self.d_sa, &g_sa, &mut self.adam_sa)?;
        Ok((ls, la))
    }
}

/// `(p_real_sas, p_real_sa)` for one transition.
pub fn discriminator_probs(pair: &DiscriminatorPair, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<DiscriminatorProbs> {
    Ok(pair.logits(s, a, s_next)?.probs())
}

/// One Adam step on each head with real labeled class 0 and sim class 1.
pub fn train_discriminators(pair: &mut DiscriminatorPair, real_batch: &[Transition], sim_batch: &[Transition]) -> Result<(f64, f64)> {
    pair.train_step(real_batch, sim_batch)
}
