//! Real environments, their perturbed simulator counterparts, and tabular MDP pairs.

mod pendulum;
mod tabular;

use serde::{Deserialize, Serialize};

pub use pendulum::{pendulum_step, wrap_angle, Pendulum, PendulumConfig, PendulumState, MAX_SPEED};
pub use tabular::{random_tabular_pair, Domain, TabularMdpPair, TABULAR_R_MAX};

use crate::error::Result;

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// True terminal state (bootstrapping stops).
    pub terminal: bool,
    /// Time-limit reached; the episode ends but the transition is not terminal.
    pub truncated: bool,
}

/// Continuous-control environment with a box action space `[-bound, bound]^d`.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_bound(&self) -> f64;
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn rand::RngCore) -> Result<StepOutcome>;
}

/// How the simulator deviates from the real system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// Simulator identical to the real system.
    None,
    /// Twice the gravitational acceleration.
    Gravity,
    /// 0.3 times the damping coefficient.
    Friction,
    /// Unit-variance Gaussian torque noise.
    JointNoise,
    /// Torque noise whose std grows with angular speed.
    SpeedNoise,
}

impl GapKind {
    pub const ALL: [GapKind; 5] = [GapKind::None, GapKind::Gravity, GapKind::Friction, GapKind::JointNoise, GapKind::SpeedNoise];

    pub fn name(self) -> &'static str {
        match self {
            GapKind::None => "none",
            GapKind::Gravity => "gravity",
            GapKind::Friction => "friction",
            GapKind::JointNoise => "joint_noise",
            GapKind::SpeedNoise => "speed_noise",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == s)
    }
}

/// Torque-noise gain per rad/s for [`GapKind::SpeedNoise`]; reaches std 2 at the speed limit.
pub const SPEED_NOISE_GAIN: f64 = 0.25;

/// Simulator configuration derived from the real one.
pub fn make_gap_variant(base: &PendulumConfig, kind: GapKind) -> PendulumConfig {
    let mut cfg = *base;
    match kind {
        GapKind::None => {}
        GapKind::Gravity => cfg.gravity = base.gravity * 2.0,
        GapKind::Friction => cfg.damping = base.damping * 0.3,
        GapKind::JointNoise => cfg.action_noise_std = 1.0,
        GapKind::SpeedNoise => cfg.speed_noise_gain = SPEED_NOISE_GAIN,
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_variants_touch_one_field() {
        let base = PendulumConfig::default();
        let g = make_gap_variant(&base, GapKind::Gravity);
        assert_eq!(g.gravity, 20.0);
        assert_eq!(PendulumConfig { gravity: 10.0, ..g }, base);

        let f = make_gap_variant(&base, GapKind::Friction);
        assert!((f.damping - 0.03).abs() < 1e-15);
        assert_eq!(PendulumConfig { damping: 0.1, ..f }, base);

        let n = make_gap_variant(&base, GapKind::JointNoise);
        assert_eq!(n.action_noise_std, 1.0);
        assert_eq!(PendulumConfig { action_noise_std: 0.0, ..n }, base);

        assert_eq!(make_gap_variant(&base, GapKind::None), base);
    }

    #[test]
    fn gap_names_round_trip() {
        for g in GapKind::ALL {
            assert_eq!(GapKind::from_name(g.name()), Some(g));
        }
    }
}
