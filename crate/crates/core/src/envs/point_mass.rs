use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, EnvSpec, Environment, Transitioned, DEFAULT_DT, DEFAULT_HORIZON};
use crate::error::Result;

/// Planar point mass driven by a bounded acceleration inside a walled box.
///
/// Physics is `(px, py, vx, vy)`; the observation equals the physics.
/// Reward is `-‖p' - goal‖ - 0.01 ‖a‖²` evaluated at the post-step position.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassParams {
    pub arena: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub goal: [f64; 2],
    pub dt: f64,
    pub horizon: usize,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            arena: 1.0,
            max_speed: 2.0,
            max_accel: 1.0,
            goal: [0.0, 0.0],
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointMass {
    params: PointMassParams,
    spec: EnvSpec,
    bound: f64,
}

impl PointMass {
    pub fn new(params: PointMassParams) -> Result<Self> {
        let spec = EnvSpec {
            name: "point_mass".into(),
            state_dim: 4,
            action_dim: 2,
            action_low: vec![-params.max_accel; 2],
            action_high: vec![params.max_accel; 2],
            horizon: params.horizon,
        };
        spec.validate()?;
        let far = params
            .goal
            .iter()
            .map(|g| (g.abs() + params.arena).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = far + 0.01 * 2.0 * params.max_accel.powi(2);
        Ok(Self { params, spec, bound })
    }

    pub fn params(&self) -> &PointMassParams {
        &self.params
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reward_bound(&self) -> f64 {
        self.bound
    }

    fn initial_physics(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a = self.params.arena;
        let mut phys = uniform_vec(rng, 2, -a, a);
        phys.extend([0.0, 0.0]);
        phys
    }

    fn observe(&self, physics: &[f64]) -> Vec<f64> {
        physics.to_vec()
    }

    fn advance(&self, physics: &[f64], action: &[f64]) -> Transitioned {
        let p = &self.params;
        let mut next = physics.to_vec();
        let mut dist2 = 0.0;
        for k in 0..2 {
            let mut v = (physics[2 + k] + p.dt * action[k]).clamp(-p.max_speed, p.max_speed);
            let mut x = physics[k] + p.dt * v;
            if x.abs() > p.arena {
                x = x.clamp(-p.arena, p.arena);
                v = 0.0;
            }
            next[k] = x;
            next[2 + k] = v;
            dist2 += (x - p.goal[k]).powi(2);
        }
        let effort: f64 = action.iter().map(|a| a * a).sum();
        Transitioned {
            physics: next,
            reward: -dist2.sqrt() - 0.01 * effort,
            terminated: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resting_at_goal_is_a_fixed_point() {
        let env = PointMass::new(PointMassParams::default()).unwrap();
        let mut s = env.reset(0);
        s.physics = vec![0.0; 4];
        s.observation = vec![0.0; 4];
        let step = env.step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(step.reward, 0.0);
        assert_eq!(step.state.observation, vec![0.0; 4]);
    }

    #[test]
    fn resets_lie_inside_the_arena() {
        let env = PointMass::new(PointMassParams::default()).unwrap();
        for seed in 0..1000 {
            let s = env.reset(seed);
            assert!(s.observation[..2].iter().all(|x| x.abs() <= 1.0));
            assert_eq!(&s.observation[2..], &[0.0, 0.0]);
            assert_eq!(s, env.reset(seed));
        }
    }

    #[test]
    fn walls_stop_the_mass() {
        let env = PointMass::new(PointMassParams::default()).unwrap();
        let mut s = env.reset(0);
        for _ in 0..100 {
            s = env.step(&s, &[1.0, 0.0]).unwrap().state;
        }
        assert_eq!(s.observation[0], 1.0);
        assert_eq!(s.observation[2], 0.0);
    }
}
