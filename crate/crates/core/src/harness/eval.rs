use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, ModelKind};
use crate::envs::{make_env, EnvName, Environment};
use crate::error::{Error, Result};
use crate::policy::{ActMode, GaussianPolicy};
use crate::rollout::run_episode;

/// Summary of a set of episode returns. `std` is the population deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub returns: Vec<f64>,
    pub env_steps: u64,
}

impl ReturnStats {
    pub fn from_returns(returns: Vec<f64>, env_steps: u64) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: returns.iter().copied().fold(f64::INFINITY, f64::min),
            max: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            returns,
            env_steps,
        }
    }
}

/// Seeds for `episodes` evaluation episodes derived from one base seed.
pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes).map(|_| rng.gen()).collect()
}

/// Runs `episodes` deterministic-action episodes.
pub fn evaluate_returns(
    env: &dyn Environment,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: u64,
) -> Result<ReturnStats> {
    if episodes == 0 {
        return Err(Error::InvalidInput("episodes must be at least 1".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut steps = 0u64;
    for s in episode_seeds(seed, episodes) {
        let ep = run_episode(env, policy, ActMode::Deterministic, s)?;
        steps += ep.len() as u64;
        returns.push(ep.total_reward);
    }
    Ok(ReturnStats::from_returns(returns, steps))
}

/// Loads a checkpoint and evaluates it on `env`.
pub fn evaluate_policy(
    checkpoint: &Path,
    env: EnvName,
    episodes: usize,
    seed: u64,
    horizon: Option<usize>,
) -> Result<ReturnStats> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let ModelKind::GaussianPolicy { policy: spec } = &ckpt.header.model else {
        return Err(Error::InvalidInput(
            "checkpoint holds a raw parameter vector, not a policy".into(),
        ));
    };
    if !env.is_rollout() {
        return Err(Error::InvalidInput(format!("{env} is not a rollout environment")));
    }
    let env = make_env(env, horizon)?;
    let es = env.spec();
    if es.state_dim != spec.state_dim || es.action_dim != spec.action_dim {
        return Err(Error::InvalidInput(format!(
            "checkpoint policy maps {} -> {}, environment {} expects {} -> {}",
            spec.state_dim, spec.action_dim, es.name, es.state_dim, es.action_dim
        )));
    }
    let policy = ckpt.policy()?;
    evaluate_returns(env.as_ref(), &policy, episodes, seed)
}
