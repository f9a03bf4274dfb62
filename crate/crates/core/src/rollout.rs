//! Running one policy for one episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::Environment;
use crate::error::{check_dim, Result};
use crate::policy::{ActMode, GaussianPolicy};
use crate::replay::Transition;

/// One full episode. `observations` has one more entry than `transitions`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub reset_seed: u64,
    pub observations: Vec<Vec<f64>>,
    pub transitions: Vec<Transition>,
    pub total_reward: f64,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &[f64]> {
        self.transitions.iter().map(|t| t.a.as_slice())
    }
}

/// Rolls `policy` out until termination or the horizon. All randomness (the
/// reset and any action noise) derives from `seed`.
pub fn run_episode(
    env: &dyn Environment,
    policy: &GaussianPolicy,
    mode: ActMode,
    seed: u64,
) -> Result<Episode> {
    let spec = env.spec();
    check_dim("policy state input", spec.state_dim, policy.state_dim())?;
    check_dim("policy action output", spec.action_dim, policy.action_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reset_seed: u64 = rng.gen();
    let mut state = env.reset(reset_seed);
    let mut observations = vec![state.observation.clone()];
    let mut transitions = Vec::with_capacity(spec.horizon);
    let mut total_reward = 0.0;
    while !state.done {
        let (action, _) = policy.act(&state.observation, mode, &mut rng)?;
        let step = env.step(&state, &spec.rescale(&action))?;
        total_reward += step.reward;
        transitions.push(Transition {
            s: state.observation,
            a: action,
            r: step.reward,
            s_next: step.state.observation.clone(),
            done: step.terminated,
        });
        observations.push(step.state.observation.clone());
        state = step.state;
    }
    Ok(Episode {
        reset_seed,
        observations,
        transitions,
        total_reward,
    })
}
