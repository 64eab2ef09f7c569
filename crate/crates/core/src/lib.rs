//! Hybrid offline-and-online reinforcement learning with simulators that are only
//! approximately right.
//!
//! A policy is trained on a small offline dataset from the real system together with
//! transitions from an imperfect simulator. Coupled classifiers estimate where the
//! simulator's dynamics diverge from reality; simulated TD errors are importance
//! weighted and Q values on high-gap samples are penalized. Baselines (SAC, CQL, DARC),
//! a pendulum testbed with configurable dynamics gaps, exact tabular checks of the
//! underestimation results and an experiment harness are included.
//!
//! The numeric core (`nn`, `theory`, `envs::TabularMdpPair`) is generic over the
//! scalar type through [`scalar::Scalar`]; the learning pipeline runs in `f64`.

pub mod agents;
pub mod data;
pub mod envs;
pub mod error;
pub mod gap;
pub mod harness;
pub mod nn;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};

pub type Mlp = nn::MlpParams<f64>;
pub type Adam = nn::AdamState<f64>;
pub type Grads = nn::Gradients<f64>;
pub type TabularMdp = envs::TabularMdpPair<f64>;
pub type Distributions = theory::TabularDistributions<f64>;
