//! Measurements shared by the oracle tests and the acceptance report.
#![allow(dead_code)]

use std::time::Instant;

use coerl::decomposition::random_grouping;
use coerl::envs::{make_env, Lqr, LqrParams};
use coerl::es::{coevolve_generation, partial_gradient_update, sample_population, EsConfig, RolloutTask, SubproblemEvent};
use coerl::harness::eval::episode_seeds;
use coerl::harness::{train, RlSteps, TrainerConfig};
use coerl::nn::{Activation, MlpParams, MlpSpec};
use coerl::policy::{ActMode, CriticPair, GaussianPolicy, PolicySpec};
use coerl::rollout::run_episode;
use coerl::sac::{actor_objective_and_grad, critic_loss_and_grad, Batch};
use coerl::tensor::{ParameterVector, Tensor2};
use coerl::{EnvName, Mode, QuadraticTask, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Central differences of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn with_theta(net: &MlpParams, theta: &[f64]) -> MlpParams {
    let mut n = net.clone();
    n.set_theta(theta.to_vec().into()).unwrap();
    n
}

/// A random small network (at most 50 parameters) with random weights.
pub fn random_mlp(rng: &mut ChaCha8Rng) -> MlpParams {
    loop {
        let input = rng.gen_range(1..=4);
        let depth = rng.gen_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=5)).collect();
        let output = rng.gen_range(1..=3);
        let act = if rng.gen_bool(0.5) { Activation::Tanh } else { Activation::Relu };
        let spec = MlpSpec::new(input, hidden, output, act).unwrap();
        if spec.param_count() <= 50 {
            let theta: Vec<f64> = normals(spec.param_count(), rng);
            return MlpParams::unflatten(spec, theta.into()).unwrap();
        }
    }
}

/// Worst relative error, over parameter and input gradients, of `c · net(x)`.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let net = random_mlp(&mut r);
    let spec = net.spec().clone();
    let x = normals(spec.input_dim, &mut r);
    let c = normals(spec.output_dim, &mut r);
    let (_, cache) = net.forward(&x).unwrap();
    let (gp, gx) = net.backward(&cache, &c).unwrap();
    let dot = |y: Vec<f64>| y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let fd_p = fd_gradient(|t| dot(with_theta(&net, t).predict(&x).unwrap()), net.theta(), 1e-6);
    let fd_x = fd_gradient(|xx| dot(net.predict(xx).unwrap()), &x, 1e-6);
    rel_err(&gp, &fd_p).max(rel_err(&gx, &fd_x))
}

fn tiny_spec() -> PolicySpec {
    PolicySpec {
        state_dim: 2,
        action_dim: 1,
        hidden_dims: vec![4],
        activation: Activation::Tanh,
    }
}

fn random_batch(n: usize, spec: &PolicySpec, r: &mut ChaCha8Rng) -> Batch {
    let items: Vec<Transition> = (0..n)
        .map(|_| Transition {
            s: normals(spec.state_dim, r),
            a: (0..spec.action_dim).map(|_| r.gen_range(-0.9..0.9)).collect(),
            r: r.gen_range(-1.0..1.0),
            s_next: normals(spec.state_dim, r),
            done: r.gen_bool(0.2),
        })
        .collect();
    Batch::from_transitions(&items.iter().collect::<Vec<_>>()).unwrap()
}

/// Critic regression loss against fixed targets (a 2-4-1 critic, 17 parameters).
pub fn critic_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let spec = tiny_spec();
    let critics = CriticPair::init(&spec, &mut r).unwrap();
    let batch = random_batch(8, &spec, &mut r);
    let targets: Vec<f64> = normals(8, &mut r);
    let (_, g) = critic_loss_and_grad(&critics.q1, &batch, &targets).unwrap();
    let fd = fd_gradient(
        |t| critic_loss_and_grad(&with_theta(&critics.q1, t), &batch, &targets).unwrap().0,
        critics.q1.theta(),
        1e-6,
    );
    rel_err(&g, &fd)
}

/// Reparameterized actor objective with frozen noise (a 2-4-2 trunk, 22 parameters).
pub fn actor_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let spec = tiny_spec();
    let policy = GaussianPolicy::init(&spec, &mut r).unwrap();
    let critics = CriticPair::init(&spec, &mut r).unwrap();
    let states = Tensor2::from_vec(8, 2, normals(16, &mut r)).unwrap();
    let noise = Tensor2::from_vec(8, 1, normals(8, &mut r)).unwrap();
    let objective = |t: &[f64]| {
        let p = GaussianPolicy::from_theta(&spec, t.to_vec().into()).unwrap();
        actor_objective_and_grad(&p, &critics, 0.2, &states, &noise).unwrap().0.value
    };
    let (_, g) = actor_objective_and_grad(&policy, &critics, 0.2, &states, &noise).unwrap();
    let fd = fd_gradient(objective, policy.theta(), 1e-6);
    rel_err(&g, &fd)
}

/// Σ_b tanh(mean_b + std_b ξ_b) through a linear 1-D policy.
pub fn reparam_toy_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let spec = PolicySpec {
        state_dim: 1,
        action_dim: 1,
        hidden_dims: vec![],
        activation: Activation::Tanh,
    };
    let policy = GaussianPolicy::from_theta(&spec, normals(4, &mut r).iter().map(|v| v * 0.5).collect::<Vec<_>>().into()).unwrap();
    let states = Tensor2::from_vec(5, 1, normals(5, &mut r)).unwrap();
    let noise = Tensor2::from_vec(5, 1, normals(5, &mut r)).unwrap();
    let (sample, cache) = policy.sample_batch(&states, &noise).unwrap();
    let ones = Tensor2::from_vec(5, 1, vec![1.0; 5]).unwrap();
    let g = policy.reparam_backward(&sample, &cache, &ones, &[0.0; 5]).unwrap();
    let fd = fd_gradient(
        |t| {
            let p = GaussianPolicy::from_theta(&spec, t.to_vec().into()).unwrap();
            p.sample_batch(&states, &noise).unwrap().0.actions.data().iter().sum()
        },
        policy.theta(),
        1e-6,
    );
    rel_err(&g, &fd)
}

/// The estimate `(1/(μσ)) Σ fᵢ εᵢ` at θ = 0 on a random quadratic, and its cosine with
/// the true gradient. `shaped` z-scores the fitness first.
pub fn es_gradient_cosine(seed: u64, d: usize, mu: usize, sigma: f64, shaped: bool) -> f64 {
    let task = QuadraticTask::new(d, seed);
    let theta = ParameterVector::zeros(d);
    let group: Vec<usize> = (0..d).collect();
    let pop = sample_population(&theta, &group, mu, sigma, &mut rng(seed ^ 0xABCD)).unwrap();
    let mut f: Vec<f64> = pop.iter().map(|p| task.fitness(&p.individual)).collect();
    if shaped {
        f = coerl::es::standardize(&f);
    }
    let mut moved = theta.clone();
    partial_gradient_update(&mut moved, &group, &pop, &f, 1.0, sigma).unwrap();
    cosine(&moved, &task.gradient(&theta))
}

/// Final over initial distance to the optimum for `es` on the d=50 quadratic.
pub fn quadratic_es_ratio(seed: u64) -> f64 {
    let config = quadratic_es_config(seed);
    let task = QuadraticTask::new(config.quadratic_dim, config.seed);
    let start = ParameterVector::zeros(config.quadratic_dim);
    let summary = train(&config).unwrap();
    summary.theta.distance(task.optimum()) / start.distance(task.optimum())
}

pub fn quadratic_es_config(seed: u64) -> TrainerConfig {
    TrainerConfig {
        env: EnvName::Quadratic,
        quadratic_dim: 50,
        mode: Mode::Es,
        total_generations: 300,
        pop_size: 20,
        sigma: 0.05,
        es_lr: 0.002,
        standardize_fitness: true,
        eval_every: 300,
        seed,
        ..TrainerConfig::default()
    }
}

/// Checks, for one generation on a policy, that every index moves in exactly
/// one subproblem, only its own, and that individuals agree with θ off the group.
/// Returns the number of violations.
pub fn exactly_once_violations(
    theta: &mut ParameterVector,
    task: &RolloutTask<'_>,
    m: usize,
    generation: u64,
    r: &mut ChaCha8Rng,
) -> usize {
    let dim = theta.len();
    let plan = random_grouping(dim, m, generation, r).unwrap();
    let config = EsConfig {
        pop_size: 4,
        sigma: 0.1,
        alpha: 1e-2,
        standardize_fitness: true,
        workers: 1,
    };
    let mut writes = vec![0usize; dim];
    let mut violations = 0usize;
    let mut observer = |e: &SubproblemEvent<'_>| -> coerl::Result<()> {
        let mut in_group = vec![false; dim];
        for &i in e.group {
            in_group[i] = true;
        }
        for i in 0..dim {
            let changed = e.before[i].to_bits() != e.after[i].to_bits();
            if changed {
                writes[i] += 1;
                if !in_group[i] {
                    violations += 1;
                }
            }
            for p in e.population {
                if !in_group[i] && p.individual[i].to_bits() != e.before[i].to_bits() {
                    violations += 1;
                }
            }
        }
        Ok(())
    };
    coevolve_generation(theta, &plan, task, &config, None, &mut observer, r).unwrap();
    violations + writes.iter().filter(|&&w| w != 1).count()
}

/// LQR run: mean final return, mean Riccati-optimal return on the same
/// evaluation starts, and their relative gap.
pub struct LqrOutcome {
    pub achieved: f64,
    pub optimal: f64,
    pub gap: f64,
    pub steps: u64,
}

pub fn lqr_config(seed: u64) -> TrainerConfig {
    TrainerConfig {
        env: EnvName::Lqr,
        mode: Mode::Coerl,
        seed,
        total_generations: 1_000_000,
        max_env_steps: Some(100_000),
        sigma: 0.05,
        es_lr: 1e-4,
        standardize_fitness: true,
        hidden_dims: vec![32, 32],
        batch_size: 64,
        rl_steps_per_generation: RlSteps::Ratio(0.25),
        eval_every: 1_000_000,
        eval_episodes: 20,
        ..TrainerConfig::default()
    }
}

pub fn lqr_run(config: &TrainerConfig) -> LqrOutcome {
    let summary = train(config).unwrap();
    let env = make_env(EnvName::Lqr, config.horizon).unwrap();
    let spec = PolicySpec {
        state_dim: 2,
        action_dim: 1,
        hidden_dims: config.hidden_dims.clone(),
        activation: config.activation,
    };
    let policy = GaussianPolicy::from_theta(&spec, summary.theta.clone()).unwrap();
    let lqr = Lqr::new(LqrParams::default()).unwrap();
    let riccati = lqr.riccati();
    let seeds = episode_seeds(777, 50);
    let (mut achieved, mut optimal) = (0.0, 0.0);
    for &s in &seeds {
        let ep = run_episode(env.as_ref(), &policy, ActMode::Deterministic, s).unwrap();
        achieved += ep.total_reward;
        optimal += riccati.optimal_return(&ep.observations[0]);
    }
    let n = seeds.len() as f64;
    let (achieved, optimal) = (achieved / n, optimal / n);
    LqrOutcome {
        achieved,
        optimal,
        gap: (optimal - achieved) / optimal.abs(),
        steps: summary.env_steps,
    }
}

/// Seconds per call of the whole-vector update at dimension `dim`.
pub fn update_seconds(dim: usize) -> f64 {
    let mut r = rng(dim as u64);
    let theta: ParameterVector = normals(dim, &mut r).into();
    let group: Vec<usize> = (0..dim).collect();
    let pop = sample_population(&theta, &group, 6, 1.0, &mut r).unwrap();
    let f = normals(6, &mut r);
    let mut t = theta.clone();
    let reps = (2_000_000 / dim).max(5);
    // warm-up
    for _ in 0..reps / 5 + 1 {
        partial_gradient_update(&mut t, &group, &pop, &f, 1e-9, 1.0).unwrap();
    }
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let start = Instant::now();
        for _ in 0..reps {
            partial_gradient_update(&mut t, &group, &pop, &f, 1e-9, 1.0).unwrap();
        }
        best = best.min(start.elapsed().as_secs_f64() / reps as f64);
    }
    best
}

/// Desk-scale settings for the ablation comparison; `mode` and `seed` vary.
pub fn ablation_config(env: EnvName, mode: Mode, seed: u64) -> TrainerConfig {
    TrainerConfig {
        env,
        mode,
        seed,
        total_generations: 1_000_000,
        max_env_steps: Some(200_000),
        sigma: 0.05,
        standardize_fitness: true,
        hidden_dims: vec![32, 32],
        batch_size: 64,
        rl_steps_per_generation: RlSteps::Ratio(0.25),
        eval_every: 1_000_000,
        eval_episodes: 10,
        ..TrainerConfig::default()
    }
}

/// Mean absolute change of the deterministic action over `states`.
pub fn action_divergence(spec: &PolicySpec, a: &ParameterVector, b: &ParameterVector, states: &[Vec<f64>]) -> f64 {
    let pa = GaussianPolicy::from_theta(spec, a.clone()).unwrap();
    let pb = GaussianPolicy::from_theta(spec, b.clone()).unwrap();
    let mut dummy = rng(0);
    let mut total = 0.0;
    for s in states {
        let (x, _) = pa.act(s, ActMode::Deterministic, &mut dummy).unwrap();
        let (y, _) = pb.act(s, ActMode::Deterministic, &mut dummy).unwrap();
        total += x.iter().zip(&y).map(|(u, v)| (u - v).abs()).sum::<f64>();
    }
    total / states.len() as f64
}

/// One behaviour-inheritance trial on pendulum: divergence after a real
/// subproblem update versus after a random full-vector step of equal norm.
pub fn behaviour_trial(seed: u64) -> (f64, f64) {
    let env = make_env(EnvName::Pendulum, None).unwrap();
    let spec = PolicySpec {
        state_dim: 3,
        action_dim: 1,
        hidden_dims: vec![64, 64],
        activation: Activation::Relu,
    };
    let mut r = rng(seed);
    let policy = GaussianPolicy::init(&spec, &mut r).unwrap();
    let theta = policy.theta().clone();
    let dim = theta.len();

    // States visited by the parent.
    let mut states = Vec::new();
    for s in episode_seeds(seed, 5) {
        states.extend(run_episode(env.as_ref(), &policy, ActMode::Deterministic, s).unwrap().observations);
    }

    let m = r.gen_range(2..=4);
    let plan = random_grouping(dim, m, 0, &mut r).unwrap();
    let first = coerl::GroupingPlan {
        dim,
        groups: vec![plan.groups[0].clone()],
        generation: 0,
    };
    let task = RolloutTask {
        env: env.as_ref(),
        policy_spec: spec.clone(),
        mode: ActMode::Stochastic,
        episodes: 1,
    };
    let config = EsConfig {
        pop_size: 6,
        sigma: 0.05,
        alpha: 1e-3,
        standardize_fitness: true,
        workers: 1,
    };
    // Only the first subproblem of the plan is applied: one partial update.
    let mut child = theta.clone();
    let mut observer = ();
    let sub = coevolve_generation(&mut child, &first, &task, &config, None, &mut observer, &mut r).unwrap();
    let norm = sub.update_norm;

    let dir = normals(dim, &mut r);
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let full: ParameterVector = theta.iter().zip(&dir).map(|(t, d)| t + norm * d / dn).collect::<Vec<_>>().into();

    (
        action_divergence(&spec, &theta, &child, &states),
        action_divergence(&spec, &theta, &full, &states),
    )
}
