//! Torque-limited pendulum swing-up, integrated with semi-implicit Euler.
//!
//! `theta = 0` is upright. The observation is `(cos theta, sin theta, theta_dot)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};

pub const MAX_SPEED: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    /// Viscous damping coefficient (1/s).
    pub damping: f64,
    pub max_torque: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Std of Gaussian noise added to the applied torque.
    pub action_noise_std: f64,
    /// Extra torque-noise std per unit of angular speed.
    pub speed_noise_gain: f64,
    pub reward_shift: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        PendulumConfig {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            damping: 0.1,
            max_torque: 2.0,
            dt: 0.05,
            max_steps: 200,
            action_noise_std: 0.0,
            speed_noise_gain: 0.0,
            reward_shift: 17.0,
        }
    }
}

impl PendulumConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !(pos(self.gravity) && pos(self.mass) && pos(self.length) && pos(self.dt) && pos(self.max_torque)) {
            return Err(Error::Config("gravity, mass, length, dt and max_torque must be positive".into()));
        }
        if !(self.damping >= 0.0 && self.action_noise_std >= 0.0 && self.speed_noise_gain >= 0.0) {
            return Err(Error::Config("damping and noise levels must be non-negative".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Torque-noise std at angular speed `theta_dot`.
    pub fn noise_std_at(&self, theta_dot: f64) -> f64 {
        self.action_noise_std + self.speed_noise_gain * theta_dot.abs()
    }

    /// Angular acceleration for the given state and effective torque.
    pub fn angular_acceleration(&self, theta: f64, theta_dot: f64, torque: f64) -> f64 {
        3.0 * self.gravity / (2.0 * self.length) * theta.sin() + 3.0 / (self.mass * self.length * self.length) * torque
            - self.damping * theta_dot
    }

    /// Kinetic plus potential energy of a uniform rod pivoting at one end.
    pub fn energy(&self, state: &PendulumState) -> f64 {
        let inertia = self.mass * self.length * self.length / 3.0;
        0.5 * inertia * state.theta_dot * state.theta_dot + self.mass * self.gravity * 0.5 * self.length * state.theta.cos()
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn observation(&self) -> [f64; 3] {
        [self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// One integration step. Returns the next state and the reward of `(state, action)`.
pub fn pendulum_step<R: Rng + ?Sized>(
    state: &PendulumState,
    action: f64,
    cfg: &PendulumConfig,
    rng: &mut R,
) -> Result<(PendulumState, f64)> {
    if !action.is_finite() {
        return Err(Error::rejected(format!("non-finite action {action}")));
    }
    let commanded = action.clamp(-cfg.max_torque, cfg.max_torque);
    let std = cfg.noise_std_at(state.theta_dot);
    let noise = if std > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    } else {
        0.0
    };
    let torque = commanded + noise;

    let th = wrap_angle(state.theta);
    let reward = cfg.reward_shift - (th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * commanded * commanded);

    let acc = cfg.angular_acceleration(state.theta, state.theta_dot, torque);
    let theta_dot = (state.theta_dot + acc * cfg.dt).clamp(-MAX_SPEED, MAX_SPEED);
    let theta = wrap_angle(state.theta + theta_dot * cfg.dt);
    Ok((PendulumState { theta, theta_dot }, reward))
}

/// Episodic pendulum with time-limit truncation.
#[derive(Debug, Clone)]
pub struct Pendulum {
    pub config: PendulumConfig,
    state: PendulumState,
    steps: usize,
}

impl Pendulum {
    pub fn new(config: PendulumConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pendulum { config, state: PendulumState { theta: PI, theta_dot: 0.0 }, steps: 0 })
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
        self.steps = 0;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl Environment for Pendulum {
    fn observation_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        self.config.max_torque
    }

    /// Initial angle uniform on the circle, angular speed uniform in `[-1, 1]`.
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let theta = wrap_angle(rng.random_range(-PI..PI));
        let theta_dot = rng.random_range(-1.0..1.0);
        self.state = PendulumState { theta, theta_dot };
        self.steps = 0;
        self.state.observation().to_vec()
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn rand::RngCore) -> Result<StepOutcome> {
        if action.len() != 1 {
            return Err(Error::rejected(format!("pendulum takes a 1-d action, got {}", action.len())));
        }
        let (next, reward) = pendulum_step(&self.state, action[0], &self.config, rng)?;
        self.state = next;
        self.steps += 1;
        Ok(StepOutcome {
            observation: next.observation().to_vec(),
            reward,
            terminal: false,
            truncated: self.steps >= self.config.max_steps,
        })
    }
}
