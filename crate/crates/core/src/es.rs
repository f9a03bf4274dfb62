//! Per-subproblem population sampling, fitness evaluation and the partial
//! gradient step.
//!
//! For a group of indices `I`, individuals are `ψᵢ = θ` with `θ[I]` replaced by
//! `θ[I] + σ εᵢ`, `εᵢ ~ N(0, I)`. After evaluation the group is moved by
//! `α / (μ σ) · Σᵢ fᵢ εᵢ`. Coordinates outside `I` are never touched.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decomposition::GroupingPlan;
use crate::envs::{Environment, QuadraticTask};
use crate::error::{Error, Result};
use crate::policy::{ActMode, GaussianPolicy, PolicySpec};
use crate::replay::{ReplayBuffer, Transition};
use crate::rollout::run_episode;
use crate::tensor::ParameterVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub epsilon: Vec<f64>,
    pub individual: ParameterVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    /// Undiscounted return (mean return when several episodes are averaged).
    pub fitness: f64,
    pub trajectory: Vec<Transition>,
    pub episode_len: usize,
}

/// Something that scores a full parameter vector.
pub trait FitnessTask: Sync {
    fn dim(&self) -> usize;

    /// Scores `individual`; all randomness derives from `seed`.
    fn evaluate(&self, individual: &ParameterVector, seed: u64) -> Result<FitnessReport>;
}

/// Scores a policy parameter vector by rolling it out.
pub struct RolloutTask<'a> {
    pub env: &'a dyn Environment,
    pub policy_spec: PolicySpec,
    pub mode: ActMode,
    pub episodes: usize,
}

impl FitnessTask for RolloutTask<'_> {
    fn dim(&self) -> usize {
        self.policy_spec.param_count().unwrap_or(0)
    }

    fn evaluate(&self, individual: &ParameterVector, seed: u64) -> Result<FitnessReport> {
        if self.episodes <= 1 {
            return evaluate_individual(self.env, individual, &self.policy_spec, self.mode, seed);
        }
        let mut total = 0.0;
        let mut trajectory = Vec::new();
        let mut episode_len = 0;
        for k in 0..self.episodes as u64 {
            let r = evaluate_individual(
                self.env,
                individual,
                &self.policy_spec,
                self.mode,
                seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            )?;
            total += r.fitness;
            episode_len += r.episode_len;
            trajectory.extend(r.trajectory);
        }
        Ok(FitnessReport {
            fitness: total / self.episodes as f64,
            trajectory,
            episode_len,
        })
    }
}

/// The quadratic task seen as a one-step episode whose reward is `f(ψ)`.
impl FitnessTask for QuadraticTask {
    fn dim(&self) -> usize {
        QuadraticTask::dim(self)
    }

    fn evaluate(&self, individual: &ParameterVector, _seed: u64) -> Result<FitnessReport> {
        if individual.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "quadratic task input",
                expected: self.dim(),
                actual: individual.len(),
            });
        }
        let fitness = self.fitness(individual);
        Ok(FitnessReport {
            fitness,
            trajectory: vec![Transition {
                s: vec![0.0],
                a: vec![0.0],
                r: fitness,
                s_next: vec![0.0],
                done: true,
            }],
            episode_len: 1,
        })
    }
}

/// One episode of the policy encoded by `individual`.
pub fn evaluate_individual(
    env: &dyn Environment,
    individual: &ParameterVector,
    policy_spec: &PolicySpec,
    mode: ActMode,
    seed: u64,
) -> Result<FitnessReport> {
    let policy = GaussianPolicy::from_theta(policy_spec, individual.clone())?;
    let episode = run_episode(env, &policy, mode, seed)?;
    Ok(FitnessReport {
        fitness: episode.total_reward,
        episode_len: episode.len(),
        trajectory: episode.transitions,
    })
}

pub fn sample_population<R: Rng + ?Sized>(
    theta: &ParameterVector,
    group: &[usize],
    mu: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Perturbation>> {
    if mu < 2 {
        return Err(Error::Config(format!("population size must be at least 2, got {mu}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise strength must be positive, got {sigma}")));
    }
    if let Some(&bad) = group.iter().find(|&&i| i >= theta.len()) {
        return Err(Error::InvalidInput(format!(
            "group index {bad} outside a {}-parameter vector",
            theta.len()
        )));
    }
    Ok((0..mu)
        .map(|_| {
            let epsilon: Vec<f64> = group.iter().map(|_| rng.sample(StandardNormal)).collect();
            let mut individual = theta.clone();
            for (&i, e) in group.iter().zip(&epsilon) {
                individual[i] += sigma * e;
            }
            Perturbation {
                epsilon,
                individual,
            }
        })
        .collect())
}

/// Applies the partial gradient step in place and returns its Euclidean norm.
pub fn partial_gradient_update(
    theta: &mut ParameterVector,
    group: &[usize],
    perturbations: &[Perturbation],
    fitnesses: &[f64],
    alpha: f64,
    sigma: f64,
) -> Result<f64> {
    if perturbations.len() != fitnesses.len() || perturbations.is_empty() {
        return Err(Error::ContractViolation(format!(
            "{} perturbations but {} fitness values",
            perturbations.len(),
            fitnesses.len()
        )));
    }
    if let Some(p) = perturbations.iter().find(|p| p.epsilon.len() != group.len()) {
        return Err(Error::ContractViolation(format!(
            "noise of length {} for a group of {}",
            p.epsilon.len(),
            group.len()
        )));
    }
    if let Some(f) = fitnesses.iter().find(|f| !f.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite fitness {f}")));
    }
    let scale = alpha / (perturbations.len() as f64 * sigma);
    let mut step = vec![0.0; group.len()];
    for (p, &f) in perturbations.iter().zip(fitnesses) {
        for (s, e) in step.iter_mut().zip(&p.epsilon) {
            *s += f * e;
        }
    }
    let mut norm2 = 0.0;
    for (&i, s) in group.iter().zip(&step) {
        let delta = scale * s;
        theta[i] += delta;
        norm2 += delta * delta;
    }
    if !norm2.is_finite() {
        return Err(Error::InvalidInput(
            "partial gradient step overflowed; reduce the learning rate or standardize fitness".into(),
        ));
    }
    Ok(norm2.sqrt())
}

/// Maps fitness values to zero mean and unit standard deviation
/// (all zeros when they are constant).
pub fn standardize(fitnesses: &[f64]) -> Vec<f64> {
    let n = fitnesses.len() as f64;
    let mean = fitnesses.iter().sum::<f64>() / n;
    let var = fitnesses.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        fitnesses.iter().map(|f| (f - mean) / std).collect()
    } else {
        vec![0.0; fitnesses.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub pop_size: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub standardize_fitness: bool,
    pub workers: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            pop_size: 6,
            sigma: 1.0,
            alpha: 1e-3,
            standardize_fitness: false,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemStats {
    pub size: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub env_steps: u64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u64,
    pub m: usize,
    pub group_sizes: Vec<usize>,
    pub subproblems: Vec<SubproblemStats>,
    pub env_steps: u64,
    /// ‖θ' - θ‖ over the whole generation.
    pub update_norm: f64,
}

impl GenerationStats {
    pub fn best_fitness(&self) -> f64 {
        self.subproblems
            .iter()
            .map(|s| s.best_fitness)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.subproblems.iter().map(|s| s.mean_fitness).sum::<f64>() / self.subproblems.len() as f64
    }
}

/// What an observer sees after each subproblem update.
pub struct SubproblemEvent<'a> {
    /// 1-based position of the subproblem within the generation.
    pub stage: usize,
    pub group: &'a [usize],
    pub before: &'a ParameterVector,
    pub after: &'a ParameterVector,
    pub population: &'a [Perturbation],
    pub fitnesses: &'a [f64],
}

pub trait GenerationObserver {
    fn on_subproblem(&mut self, event: &SubproblemEvent<'_>) -> Result<()>;
}

impl GenerationObserver for () {
    fn on_subproblem(&mut self, _: &SubproblemEvent<'_>) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&SubproblemEvent<'_>) -> Result<()>> GenerationObserver for F {
    fn on_subproblem(&mut self, event: &SubproblemEvent<'_>) -> Result<()> {
        self(event)
    }
}

/// Evaluates every individual, fanning out over `workers` threads. Results come
/// back in individual order regardless of scheduling.
pub fn evaluate_population(
    task: &dyn FitnessTask,
    population: &[Perturbation],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<FitnessReport>> {
    debug_assert_eq!(population.len(), seeds.len());
    let workers = workers.clamp(1, population.len().max(1));
    if workers == 1 {
        return population
            .iter()
            .zip(seeds)
            .map(|(p, &s)| task.evaluate(&p.individual, s))
            .collect();
    }
    let chunk = population.len().div_ceil(workers);
    let results: Vec<Result<Vec<FitnessReport>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = population
            .chunks(chunk)
            .zip(seeds.chunks(chunk))
            .map(|(ps, ss)| {
                scope.spawn(move || {
                    ps.iter()
                        .zip(ss)
                        .map(|(p, &s)| task.evaluate(&p.individual, s))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(population.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// One generation of cooperative coevolution over `plan`.
///
/// Groups are processed in plan order and each population is sampled around
/// the θ already updated by the groups before it. Every trajectory is appended
/// to `buffer` (when given) in individual order.
pub fn coevolve_generation<R: Rng + ?Sized>(
    theta: &mut ParameterVector,
    plan: &GroupingPlan,
    task: &dyn FitnessTask,
    config: &EsConfig,
    mut buffer: Option<&mut ReplayBuffer>,
    observer: &mut dyn GenerationObserver,
    rng: &mut R,
) -> Result<GenerationStats> {
    if plan.dim != theta.len() {
        return Err(Error::InvalidInput(format!(
            "plan covers {} parameters, θ has {}",
            plan.dim,
            theta.len()
        )));
    }
    let start = theta.clone();
    let mut subproblems = Vec::with_capacity(plan.len());
    let mut env_steps = 0u64;
    for (j, group) in plan.groups.iter().enumerate() {
        let population = sample_population(theta, group, config.pop_size, config.sigma, rng)?;
        let seeds: Vec<u64> = (0..population.len()).map(|_| rng.gen()).collect();
        let reports = evaluate_population(task, &population, &seeds, config.workers)?;

        let fitnesses: Vec<f64> = reports.iter().map(|r| r.fitness).collect();
        let steps: u64 = reports.iter().map(|r| r.trajectory.len() as u64).sum();
        env_steps += steps;
        if let Some(buf) = buffer.as_deref_mut() {
            for r in reports {
                buf.extend(r.trajectory);
            }
        }

        let shaped = if config.standardize_fitness {
            standardize(&fitnesses)
        } else {
            fitnesses.clone()
        };
        let before = theta.clone();
        let update_norm =
            partial_gradient_update(theta, group, &population, &shaped, config.alpha, config.sigma)?;
        observer.on_subproblem(&SubproblemEvent {
            stage: j + 1,
            group,
            before: &before,
            after: theta,
            population: &population,
            fitnesses: &fitnesses,
        })?;
        subproblems.push(SubproblemStats {
            size: group.len(),
            best_fitness: fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
            env_steps: steps,
            update_norm,
        });
    }
    Ok(GenerationStats {
        generation: plan.generation,
        m: plan.len(),
        group_sizes: plan.group_sizes(),
        subproblems,
        env_steps,
        update_norm: theta.distance(&start),
    })
}
