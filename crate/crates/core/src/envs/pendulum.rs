use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, EnvSpec, Environment, Transitioned, DEFAULT_DT, DEFAULT_HORIZON};
use crate::error::Result;

/// Torque-limited pendulum swing-up.
///
/// The angle is measured from upright, so `θ'' = (g/l) sin θ + u / (m l²)`.
/// Semi-implicit Euler: velocity first, then angle with the new velocity.
/// Observation `(cos θ, sin θ, ω)`; reward `-(θ̄² + 0.1 ω² + 0.001 u²)` with
/// `θ̄` the pre-step angle wrapped to `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    pub gravity: f64,
    pub length: f64,
    pub mass: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            length: 1.0,
            mass: 1.0,
            max_torque: 2.0,
            max_speed: 8.0,
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    spec: EnvSpec,
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        let spec = EnvSpec {
            name: "pendulum".into(),
            state_dim: 3,
            action_dim: 1,
            action_low: vec![-params.max_torque],
            action_high: vec![params.max_torque],
            horizon: params.horizon,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    /// Kinetic plus potential energy of `(θ, ω)`, potential zero at the pivot.
    pub fn energy(&self, physics: &[f64]) -> f64 {
        let p = &self.params;
        let (theta, omega) = (physics[0], physics[1]);
        0.5 * p.mass * (p.length * omega).powi(2) + p.mass * p.gravity * p.length * theta.cos()
    }

    /// State with the given angle and angular velocity at `t = 0`.
    pub fn state_at(&self, theta: f64, omega: f64) -> super::EnvState {
        let physics = vec![theta, omega];
        super::EnvState {
            observation: self.observe(&physics),
            t: 0,
            done: false,
            physics,
        }
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reward_bound(&self) -> f64 {
        let p = &self.params;
        PI * PI + 0.1 * p.max_speed.powi(2) + 0.001 * p.max_torque.powi(2)
    }

    fn initial_physics(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut phys = uniform_vec(rng, 1, -PI, PI);
        phys.extend(uniform_vec(rng, 1, -1.0, 1.0));
        phys
    }

    fn observe(&self, physics: &[f64]) -> Vec<f64> {
        vec![physics[0].cos(), physics[0].sin(), physics[1]]
    }

    fn advance(&self, physics: &[f64], action: &[f64]) -> Transitioned {
        let p = &self.params;
        let (theta, omega) = (physics[0], physics[1]);
        let u = action[0];
        let angle = wrap_angle(theta);
        let reward = -(angle * angle + 0.1 * omega * omega + 0.001 * u * u);
        let accel = p.gravity / p.length * theta.sin() + u / (p.mass * p.length * p.length);
        let omega_next = (omega + p.dt * accel).clamp(-p.max_speed, p.max_speed);
        let theta_next = theta + p.dt * omega_next;
        Transitioned {
            physics: vec![theta_next, omega_next],
            reward,
            terminated: false,
        }
    }
}
