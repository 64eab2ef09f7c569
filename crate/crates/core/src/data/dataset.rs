//! Offline datasets and their text file format.
//!
//! The first line is `h2o-dataset v1 <state_dim> <action_dim> <domain>`; every
//! following line is one transition `s..., a..., r, s'..., done` with `done` as 0/1.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::transition::{Transition, TransitionSource};
use crate::envs::{Domain, Environment};
use crate::error::{Error, Result};
use crate::scalar::format_exact;

const MAGIC: &str = "h2o-dataset v1";

/// A fixed collection of transitions with known dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub state_dim: usize,
    pub action_dim: usize,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(state_dim: usize, action_dim: usize, transitions: Vec<Transition>) -> Result<Self> {
        for (i, t) in transitions.iter().enumerate() {
            if t.s.len() != state_dim || t.a.len() != action_dim || !t.is_valid() {
                return Err(Error::rejected(format!("transition {i} has wrong shape or non-finite entries")));
            }
        }
        Ok(Dataset { state_dim, action_dim, transitions })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn to_text(&self) -> String {
        let domain = match self.transitions.first().map(|t| t.domain) {
            Some(Domain::Sim) => "sim",
            _ => "real",
        };
        let mut out = format!("{MAGIC} {} {} {domain}\n", self.state_dim, self.action_dim);
        for t in &self.transitions {
            let mut fields: Vec<String> = Vec::with_capacity(2 * self.state_dim + self.action_dim + 2);
            fields.extend(t.s.iter().map(|&x| format_exact(x)));
            fields.extend(t.a.iter().map(|&x| format_exact(x)));
            fields.push(format_exact(t.r));
            fields.extend(t.s_next.iter().map(|&x| format_exact(x)));
            fields.push(if t.done { "1".into() } else { "0".into() });
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let rest = header.strip_prefix(MAGIC).ok_or_else(|| Error::Parse("missing dataset header".into()))?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse("dataset header needs state_dim action_dim domain".into()));
        }
        let sd: usize = parts[0].parse().map_err(|_| Error::Parse("bad state_dim".into()))?;
        let ad: usize = parts[1].parse().map_err(|_| Error::Parse("bad action_dim".into()))?;
        let domain = match parts[2] {
            "real" => Domain::Real,
            "sim" => Domain::Sim,
            other => return Err(Error::Parse(format!("unknown domain {other}"))),
        };
        let width = 2 * sd + ad + 2;
        let mut transitions = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != width {
                return Err(Error::Parse(format!("line {}: expected {width} fields, found {}", lineno + 2, f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 2)));
            let s = f[..sd].iter().map(|x| num(x)).collect::<Result<Vec<_>>>()?;
            let a = f[sd..sd + ad].iter().map(|x| num(x)).collect::<Result<Vec<_>>>()?;
            let r = num(f[sd + ad])?;
            let s_next = f[sd + ad + 1..2 * sd + ad + 1].iter().map(|x| num(x)).collect::<Result<Vec<_>>>()?;
            let done = match f[width - 1].trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("line {}: bad done flag `{other}`", lineno + 2))),
            };
            transitions.push(Transition { s, a, r, s_next, done, domain });
        }
        Dataset::new(sd, ad, transitions)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Undiscounted returns of the complete episodes in collection order.
    ///
    /// Episodes are delimited by `episode_len` consecutive transitions.
    pub fn episode_returns(&self, episode_len: usize) -> Vec<f64> {
        self.transitions.chunks_exact(episode_len).map(|c| c.iter().map(|t| t.r).sum()).collect()
    }
}

impl TransitionSource for Dataset {
    fn len(&self) -> usize {
        self.transitions.len()
    }

    fn get(&self, i: usize) -> &Transition {
        &self.transitions[i]
    }
}

/// Rolls `policy` (plus Gaussian exploration noise) in `env` until exactly
/// `n_transitions` transitions are collected. Transitions are tagged real.
pub fn collect_dataset(
    env: &mut dyn Environment,
    policy: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    n_transitions: usize,
    exploration_noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_transitions == 0 {
        return Err(Error::rejected("n_transitions must be positive"));
    }
    if !(exploration_noise_std >= 0.0) {
        return Err(Error::rejected("exploration noise std must be non-negative"));
    }
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(2);
    let noise = Normal::new(0.0, exploration_noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    let bound = env.action_bound();

    let mut out = Vec::with_capacity(n_transitions);
    let mut obs = env.reset(&mut env_rng);
    while out.len() < n_transitions {
        let mut a = policy(&obs);
        if a.len() != env.action_dim() {
            return Err(Error::rejected("policy returned wrong action dimension"));
        }
        for x in a.iter_mut() {
            if exploration_noise_std > 0.0 {
                *x += noise.sample(&mut noise_rng);
            }
            *x = x.clamp(-bound, bound);
        }
        let step = env.step(&a, &mut env_rng)?;
        out.push(Transition {
            s: obs,
            a,
            r: step.reward,
            s_next: step.observation.clone(),
            done: step.terminal,
            domain: Domain::Real,
        });
        obs = if step.terminal || step.truncated { env.reset(&mut env_rng) } else { step.observation };
    }
    Dataset::new(env.observation_dim(), env.action_dim(), out)
}

/// Uniform sampling with replacement.
pub fn sample_batch<S, R>(source: &S, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>>
where
    S: TransitionSource + ?Sized,
    R: Rng + ?Sized,
{
    if source.is_empty() {
        return Err(Error::rejected("cannot sample from an empty source"));
    }
    let n = source.len();
    Ok((0..batch_size).map(|_| source.get(rng.random_range(0..n)).clone()).collect())
}
