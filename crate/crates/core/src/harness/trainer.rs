//! The generation loop: grouping, coevolution, then the actor-critic phase.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{checkpoint_path, Checkpoint, ModelKind};
use super::config::{Mode, TrainerConfig};
use super::eval::{evaluate_returns, ReturnStats};
use super::metrics::{apply_rl, join_sizes, Event, EventLog, MetricsRow, MetricsWriter};
use crate::decomposition::{draw_group_count, random_grouping};
use crate::envs::{make_env, EnvName, Environment, QuadraticTask};
use crate::error::{Error, Result};
use crate::es::{coevolve_generation, FitnessTask, GenerationStats, RolloutTask, SubproblemEvent};
use crate::policy::{ActMode, CriticPair, GaussianPolicy, PolicySpec};
use crate::replay::ReplayBuffer;
use crate::rollout::run_episode;
use crate::sac::{rl_phase, LearnerState};
use crate::tensor::ParameterVector;

// Independent random streams, one per purpose, so that e.g. turning off the
// RL phase cannot shift the evolutionary noise.
const STREAM_INIT: u64 = 1;
const STREAM_EVO: u64 = 2;
const STREAM_RL: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_COLLECT: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_hash: String,
    pub generations: u64,
    pub env_steps: u64,
    pub eval_env_steps: u64,
    pub theta: ParameterVector,
    pub rows: Vec<MetricsRow>,
    /// Last evaluation performed (always the final generation when T > 0).
    pub final_eval: Option<ReturnStats>,
    pub budget_exhausted: bool,
}

impl RunSummary {
    pub fn final_return(&self) -> Option<f64> {
        self.final_eval.as_ref().map(|e| e.mean)
    }
}

enum Problem {
    Rollout {
        env: Box<dyn Environment>,
        spec: PolicySpec,
        learner: Box<LearnerState>,
        buffer: ReplayBuffer,
    },
    Quadratic(QuadraticTask),
}

struct Outputs {
    dir: PathBuf,
    metrics: MetricsWriter,
    events: EventLog,
}

struct Run<'a> {
    config: &'a TrainerConfig,
    hash: String,
    model: ModelKind,
    out: Option<Outputs>,
}

impl Run<'_> {
    fn emit(&mut self, event: Event) -> Result<()> {
        match &mut self.out {
            Some(o) => o.events.emit(&event),
            None => Ok(()),
        }
    }

    fn save(&mut self, generation: u64, stage: Option<usize>, theta: &ParameterVector) -> Result<()> {
        let Some(o) = &self.out else { return Ok(()) };
        let path = checkpoint_path(&o.dir, generation, stage);
        Checkpoint::new(
            self.model.clone(),
            self.config.env,
            self.hash.clone(),
            generation,
            stage,
            theta.clone(),
        )?
        .save(&path)?;
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        self.emit(Event::Checkpoint { generation, stage, file })
    }
}

/// Runs a full training job. When `config.out_dir` is set the run directory
/// receives `config.json`, `metrics.csv`, `events.jsonl` and checkpoints;
/// otherwise everything stays in memory.
///
/// Any error aborts the run after checkpointing the last completed generation.
pub fn train(config: &TrainerConfig) -> Result<RunSummary> {
    config.validate()?;
    let hash = config.config_hash();
    let mut init_rng = stream(config.seed, STREAM_INIT);

    let (mut problem, mut theta, model) = if config.env == EnvName::Quadratic {
        let task = QuadraticTask::new(config.quadratic_dim, config.seed);
        let theta = ParameterVector::zeros(config.quadratic_dim);
        (Problem::Quadratic(task), theta, ModelKind::RawVector { dim: config.quadratic_dim })
    } else {
        let env = make_env(config.env, config.horizon)?;
        let spec = PolicySpec {
            state_dim: env.spec().state_dim,
            action_dim: env.spec().action_dim,
            hidden_dims: config.hidden_dims.clone(),
            activation: config.activation,
        };
        let policy = GaussianPolicy::init(&spec, &mut init_rng)?;
        let critics = CriticPair::init(&spec, &mut init_rng)?;
        let theta = policy.theta().clone();
        let learner = LearnerState::new(policy, critics, &config.sac_config())?;
        let buffer = ReplayBuffer::new(config.buffer_capacity)?;
        let model = ModelKind::GaussianPolicy { policy: spec.clone() };
        (
            Problem::Rollout { env, spec, learner: Box::new(learner), buffer },
            theta,
            model,
        )
    };

    let out = match &config.out_dir {
        Some(dir) => Some(open_outputs(dir, config)?),
        None => None,
    };
    let mut run = Run { config, hash: hash.clone(), model, out };
    run.emit(Event::RunStarted {
        config_hash: hash.clone(),
        mode: config.mode.to_string(),
        env: config.env.to_string(),
        seed: config.seed,
        param_count: theta.len(),
    })?;
    run.save(0, None, &theta)?;

    let mut evo_rng = stream(config.seed, STREAM_EVO);
    let mut rl_rng = stream(config.seed, STREAM_RL);
    let mut collect_rng = stream(config.seed, STREAM_COLLECT);
    let eval_seed: u64 = stream(config.seed, STREAM_EVAL).gen();

    let mut summary = RunSummary {
        config_hash: hash,
        generations: 0,
        env_steps: 0,
        eval_env_steps: 0,
        theta: theta.clone(),
        rows: Vec::new(),
        final_eval: None,
        budget_exhausted: false,
    };

    for generation in 1..=config.total_generations {
        let last_good = theta.clone();
        let step = one_generation(
            &mut run,
            &mut problem,
            &mut theta,
            generation,
            eval_seed,
            &mut summary,
            [&mut evo_rng, &mut rl_rng, &mut collect_rng],
        );
        if let Err(e) = step {
            let completed = generation - 1;
            // Best effort: the original error matters more than a failed save.
            let _ = run.save(completed, None, &last_good);
            let _ = run.emit(Event::Aborted { generation, error: e.to_string() });
            return Err(e);
        }
        summary.generations = generation;
        if summary.budget_exhausted {
            break;
        }
    }
    summary.theta = theta;
    run.emit(Event::RunFinished {
        generations: summary.generations,
        env_steps: summary.env_steps,
        eval_env_steps: summary.eval_env_steps,
    })?;
    Ok(summary)
}

fn open_outputs(dir: &Path, config: &TrainerConfig) -> Result<Outputs> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)?)?;
    Ok(Outputs {
        dir: dir.to_path_buf(),
        metrics: MetricsWriter::create(&dir.join("metrics.csv"))?,
        events: EventLog::create(&dir.join("events.jsonl"))?,
    })
}

#[allow(clippy::too_many_arguments)]
fn one_generation(
    run: &mut Run<'_>,
    problem: &mut Problem,
    theta: &mut ParameterVector,
    generation: u64,
    eval_seed: u64,
    summary: &mut RunSummary,
    [evo_rng, rl_rng, collect_rng]: [&mut ChaCha8Rng; 3],
) -> Result<()> {
    let config = run.config;
    let mut row = MetricsRow { generation, ..MetricsRow::default() };
    let checkpoint_due = generation % config.checkpoint_every == 0;

    let gen_steps = if config.mode.evolves() {
        let m = draw_group_count(&config.effective_candidates(), evo_rng)?;
        let plan_seed: u64 = evo_rng.gen();
        let plan = random_grouping(theta.len(), m, generation, &mut ChaCha8Rng::seed_from_u64(plan_seed))?;
        run.emit(Event::Grouping {
            generation,
            plan_seed,
            m: plan.len(),
            group_sizes: plan.group_sizes(),
            groups: config.log_full_groups.then(|| plan.groups.clone()),
        })?;

        let es = config.es_config();
        let save_stages = config.stage_checkpoints && checkpoint_due;
        let mut observer = |e: &SubproblemEvent<'_>| -> Result<()> {
            if save_stages {
                run.save(generation, Some(e.stage), e.after)?;
            }
            Ok(())
        };
        let stats: GenerationStats = match problem {
            Problem::Rollout { env, spec, buffer, .. } => {
                let task = RolloutTask {
                    env: env.as_ref(),
                    policy_spec: spec.clone(),
                    mode: config.evolution_act_mode,
                    episodes: config.episodes_per_individual,
                };
                coevolve_generation(theta, &plan, &task, &es, Some(buffer), &mut observer, evo_rng)?
            }
            Problem::Quadratic(task) => {
                let task: &dyn FitnessTask = task;
                coevolve_generation(theta, &plan, task, &es, None, &mut observer, evo_rng)?
            }
        };
        row.m = stats.m;
        row.group_sizes = join_sizes(&stats.group_sizes);
        row.best_fitness = Some(stats.best_fitness());
        row.mean_fitness = Some(stats.mean_fitness());
        row.update_norm = Some(stats.update_norm);
        let steps = stats.env_steps;
        run.emit(Event::Subproblems { generation, stats: stats.subproblems })?;
        steps
    } else {
        collect_with_learner(problem, theta, config, collect_rng, &mut row)?
    };

    // Quadratic fitness evaluations are not environment steps.
    if matches!(problem, Problem::Rollout { .. }) {
        summary.env_steps += gen_steps;
    }

    if let Problem::Rollout { learner, buffer, .. } = problem {
        if config.mode.learns() {
            learner.policy.trunk_mut().set_theta(theta.clone())?;
            let steps = config.rl_steps_per_generation.resolve(gen_steps);
            let rl = rl_phase(learner, buffer, steps, config.batch_size, rl_rng)?;
            *theta = learner.policy.theta().clone();
            apply_rl(&mut row, &rl);
            run.emit(Event::RlPhase { generation, stats: rl })?;
        }
        row.buffer_size = buffer.len();
    }
    row.env_steps = summary.env_steps;

    let exhausted = config.max_env_steps.is_some_and(|b| summary.env_steps >= b);
    let last = exhausted || generation == config.total_generations;
    if generation % config.eval_every == 0 || last {
        let stats = evaluate(problem, theta, config.eval_episodes, eval_seed)?;
        summary.eval_env_steps += stats.env_steps;
        row.eval_mean = Some(stats.mean);
        row.eval_std = Some(stats.std);
        row.eval_min = Some(stats.min);
        row.eval_max = Some(stats.max);
        run.emit(Event::Evaluation {
            generation,
            mean: stats.mean,
            std: stats.std,
            min: stats.min,
            max: stats.max,
            returns: stats.returns.clone(),
        })?;
        summary.final_eval = Some(stats);
    }
    row.eval_env_steps = summary.eval_env_steps;

    if exhausted {
        summary.budget_exhausted = true;
        run.emit(Event::BudgetExhausted { generation, env_steps: summary.env_steps })?;
    }
    if checkpoint_due || last {
        run.save(generation, None, theta)?;
    }
    if let Some(o) = &mut run.out {
        o.metrics.write(&row)?;
    }
    summary.rows.push(row);
    Ok(())
}

/// The `sac` baseline's data collection: stochastic episodes of the current
/// policy.
fn collect_with_learner(
    problem: &mut Problem,
    theta: &ParameterVector,
    config: &TrainerConfig,
    rng: &mut ChaCha8Rng,
    row: &mut MetricsRow,
) -> Result<u64> {
    let Problem::Rollout { env, spec, buffer, .. } = problem else {
        return Err(Error::Config(format!("mode {} needs a rollout environment", Mode::Sac)));
    };
    let policy = GaussianPolicy::from_theta(spec, theta.clone())?;
    let episodes = config.sac_episodes_per_generation.unwrap_or(config.pop_size).max(1);
    let mut steps = 0u64;
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let ep = run_episode(env.as_ref(), &policy, ActMode::Stochastic, rng.gen())?;
        steps += ep.len() as u64;
        returns.push(ep.total_reward);
        buffer.extend(ep.transitions);
    }
    row.best_fitness = returns.iter().copied().reduce(f64::max);
    row.mean_fitness = Some(returns.iter().sum::<f64>() / episodes as f64);
    Ok(steps)
}

fn evaluate(problem: &Problem, theta: &ParameterVector, episodes: usize, seed: u64) -> Result<ReturnStats> {
    match problem {
        Problem::Rollout { env, spec, .. } => {
            let policy = GaussianPolicy::from_theta(spec, theta.clone())?;
            evaluate_returns(env.as_ref(), &policy, episodes, seed)
        }
        Problem::Quadratic(task) => Ok(ReturnStats::from_returns(vec![task.fitness(theta)], 0)),
    }
}
