//! Deterministic continuous-control environments.
//!
//! Every environment is a pure function of `(state, action)`: [`Environment::step`]
//! takes the current [`EnvState`] by reference and returns the next one, so
//! one instance can serve any number of concurrent rollouts.

mod lqr;
mod pendulum;
mod point_mass;
mod quadratic;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use lqr::{Lqr, LqrParams, RiccatiSolution};
pub use pendulum::{Pendulum, PendulumParams};
pub use point_mass::{PointMass, PointMassParams};
pub use quadratic::QuadraticTask;

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config(format!("{}: horizon must be at least 1", self.name)));
        }
        check_dim("action_low", self.action_dim, self.action_low.len())?;
        check_dim("action_high", self.action_dim, self.action_high.len())?;
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(Error::Config(format!("{}: action bounds must satisfy low < high", self.name)));
        }
        Ok(())
    }

    /// Maps a policy action in `[-1, 1]` onto `[low, high]`.
    pub fn rescale(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (l, h))| l + (a.clamp(-1.0, 1.0) + 1.0) * 0.5 * (h - l))
            .collect()
    }

    pub fn clip(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (l, h))| a.clamp(*l, *h))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub t: usize,
    /// True termination or horizon reached; no further steps are accepted.
    pub done: bool,
    pub(crate) physics: Vec<f64>,
}

impl EnvState {
    pub fn physics(&self) -> &[f64] {
        &self.physics
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub reward: f64,
    /// Environment-true termination, excluding horizon truncation.
    pub terminated: bool,
}

/// Result of advancing raw physics by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitioned {
    pub physics: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
}

pub trait Environment: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Largest reward magnitude the environment can emit.
    fn reward_bound(&self) -> f64;

    fn initial_physics(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn observe(&self, physics: &[f64]) -> Vec<f64>;

    /// Advances physics under an action already clipped to the bounds.
    fn advance(&self, physics: &[f64], action: &[f64]) -> Transitioned;

    fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let physics = self.initial_physics(&mut rng);
        EnvState {
            observation: self.observe(&physics),
            t: 0,
            done: false,
            physics,
        }
    }

    /// Steps with an action in environment units; out-of-range actions are clipped.
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<Step> {
        if state.done {
            return Err(Error::ContractViolation(format!(
                "{}: step called on a finished episode (t = {})",
                self.spec().name,
                state.t
            )));
        }
        check_dim("action", self.spec().action_dim, action.len())?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::EnvFault {
                step: state.t,
                reason: format!("non-finite action {action:?}"),
            });
        }
        let clipped = self.spec().clip(action);
        let next = self.advance(&state.physics, &clipped);
        let observation = self.observe(&next.physics);
        if !next.reward.is_finite() || observation.iter().any(|v| !v.is_finite()) {
            return Err(Error::EnvFault {
                step: state.t,
                reason: "non-finite state or reward".into(),
            });
        }
        if next.reward.abs() > self.reward_bound() {
            return Err(Error::EnvFault {
                step: state.t,
                reason: format!(
                    "reward {} exceeds declared bound {}",
                    next.reward,
                    self.reward_bound()
                ),
            });
        }
        let t = state.t + 1;
        Ok(Step {
            state: EnvState {
                observation,
                t,
                done: next.terminated || t >= self.spec().horizon,
                physics: next.physics,
            },
            reward: next.reward,
            terminated: next.terminated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    PointMass,
    Pendulum,
    Lqr,
    Quadratic,
}

impl EnvName {
    pub const ALL: [EnvName; 4] = [
        EnvName::PointMass,
        EnvName::Pendulum,
        EnvName::Lqr,
        EnvName::Quadratic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::PointMass => "point_mass",
            EnvName::Pendulum => "pendulum",
            EnvName::Lqr => "lqr",
            EnvName::Quadratic => "quadratic",
        }
    }

    /// Whether the name denotes a rollout environment (as opposed to the
    /// pure-fitness quadratic task).
    pub fn is_rollout(self) -> bool {
        self != EnvName::Quadratic
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown environment {s:?}")))
    }
}

/// Builds a rollout environment, optionally overriding its horizon.
pub fn make_env(name: EnvName, horizon: Option<usize>) -> Result<Box<dyn Environment>> {
    let env: Box<dyn Environment> = match name {
        EnvName::PointMass => {
            let mut p = PointMassParams::default();
            if let Some(h) = horizon {
                p.horizon = h;
            }
            Box::new(PointMass::new(p)?)
        }
        EnvName::Pendulum => {
            let mut p = PendulumParams::default();
            if let Some(h) = horizon {
                p.horizon = h;
            }
            Box::new(Pendulum::new(p)?)
        }
        EnvName::Lqr => {
            let mut p = LqrParams::default();
            if let Some(h) = horizon {
                p.horizon = h;
            }
            Box::new(Lqr::new(p)?)
        }
        EnvName::Quadratic => {
            return Err(Error::Config(
                "the quadratic task is a pure fitness function, not a rollout environment".into(),
            ))
        }
    };
    Ok(env)
}

pub(crate) fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, low: f64, high: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(low..=high)).collect()
}
