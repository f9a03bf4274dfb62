//! State-visitation traces of checkpointed policies, for offline behaviour
//! analysis.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{checkpoint_path, Checkpoint, ModelKind};
use super::config::TrainerConfig;
use crate::envs::{make_env, EnvName, Environment};
use crate::error::{Error, Result};
use crate::policy::ActMode;

/// One deterministic episode of one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub checkpoint: String,
    pub env: EnvName,
    pub horizon: usize,
    pub generation: u64,
    pub stage: Option<usize>,
    pub reset_seed: u64,
    /// Full internal state, `len = actions.len() + 1`.
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    /// Actions as applied to the environment (already rescaled to its bounds).
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

fn trace_one(env: &dyn Environment, path: &Path, reset_seed: u64) -> Result<Trace> {
    let ckpt = Checkpoint::load(path)?;
    let ModelKind::GaussianPolicy { policy: spec } = &ckpt.header.model else {
        return Err(Error::InvalidInput(format!(
            "{} holds a raw vector; traces need a policy",
            path.display()
        )));
    };
    let es = env.spec();
    if spec.state_dim != es.state_dim || spec.action_dim != es.action_dim {
        return Err(Error::InvalidInput(format!(
            "{} does not match environment {}",
            path.display(),
            es.name
        )));
    }
    let policy = ckpt.policy()?;
    // Deterministic actions never consume randomness; the rng only satisfies `act`.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = env.reset(reset_seed);
    let mut trace = Trace {
        checkpoint: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        env: ckpt.header.env,
        horizon: es.horizon,
        generation: ckpt.header.generation,
        stage: ckpt.header.stage,
        reset_seed,
        states: vec![state.physics().to_vec()],
        observations: vec![state.observation.clone()],
        actions: Vec::new(),
        rewards: Vec::new(),
    };
    while !state.done {
        let (action, _) = policy.act(&state.observation, ActMode::Deterministic, &mut rng)?;
        let applied = es.rescale(&action);
        let step = env.step(&state, &applied)?;
        trace.states.push(step.state.physics().to_vec());
        trace.observations.push(step.state.observation.clone());
        trace.actions.push(applied);
        trace.rewards.push(step.reward);
        state = step.state;
    }
    Ok(trace)
}

/// Traces every checkpoint from the same initial state and writes them as JSONL.
/// All checkpoints must describe the same policy shape.
pub fn export_traces(
    checkpoints: &[PathBuf],
    env: EnvName,
    horizon: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<Vec<Trace>> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidInput("no checkpoints to trace".into()));
    }
    let env_box = make_env(env, horizon)?;
    let reset_seed = ChaCha8Rng::seed_from_u64(seed).gen();
    let mut traces = Vec::with_capacity(checkpoints.len());
    let mut shape = None;
    for path in checkpoints {
        let t = trace_one(env_box.as_ref(), path, reset_seed)?;
        let header = Checkpoint::load(path)?.header.model;
        match &shape {
            None => shape = Some(header),
            Some(s) if *s != header => {
                return Err(Error::InvalidInput(format!(
                    "{} has a different policy shape from the first checkpoint",
                    path.display()
                )))
            }
            _ => {}
        }
        traces.push(t);
    }
    let mut w = BufWriter::new(File::create(out)?);
    for t in &traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(traces)
}

/// Checkpoints of one generation in a run directory: the per-subproblem
/// snapshots when present, otherwise the end-of-generation snapshot.
pub fn generation_checkpoints(run_dir: &Path, generation: u64) -> Result<Vec<PathBuf>> {
    let mut staged = Vec::new();
    for j in 1.. {
        let p = checkpoint_path(run_dir, generation, Some(j));
        if !p.exists() {
            break;
        }
        staged.push(p);
    }
    if !staged.is_empty() {
        return Ok(staged);
    }
    let p = checkpoint_path(run_dir, generation, None);
    if p.exists() {
        Ok(vec![p])
    } else {
        Err(Error::InvalidInput(format!(
            "no checkpoint for generation {generation} in {}",
            run_dir.display()
        )))
    }
}

/// Writes `traces.jsonl` into a run directory for one generation.
pub fn export_run_traces(run_dir: &Path, generation: u64) -> Result<Vec<Trace>> {
    let config = TrainerConfig::from_json_file(&run_dir.join("config.json"))?;
    let ckpts = generation_checkpoints(run_dir, generation)?;
    export_traces(
        &ckpts,
        config.env,
        config.horizon,
        config.seed,
        &run_dir.join("traces.jsonl"),
    )
}

pub fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Re-runs the environment on the logged actions and returns the states it
/// visits.
pub fn replay_trace(trace: &Trace) -> Result<Vec<Vec<f64>>> {
    let env = make_env(trace.env, Some(trace.horizon))?;
    let mut state = env.reset(trace.reset_seed);
    let mut states = vec![state.physics().to_vec()];
    for a in &trace.actions {
        let step = env.step(&state, a)?;
        states.push(step.state.physics().to_vec());
        state = step.state;
    }
    Ok(states)
}
