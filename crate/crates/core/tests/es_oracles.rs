mod common;

use coerl::decomposition::random_grouping;
use coerl::envs::{make_env, Lqr, LqrParams};
use coerl::es::{coevolve_generation, partial_gradient_update, sample_population, EsConfig, FitnessTask, RolloutTask, SubproblemEvent};
use coerl::nn::Activation;
use coerl::policy::{ActMode, PolicySpec};
use coerl::{EnvName, ParameterVector, ReplayBuffer};
use common::*;

fn spec_500() -> PolicySpec {
    // 3·83 + 83 + 83·2 + 2 = 500 parameters.
    PolicySpec {
        state_dim: 3,
        action_dim: 1,
        hidden_dims: vec![83],
        activation: Activation::Relu,
    }
}

#[test]
fn estimate_points_along_the_true_gradient() {
    let mean: f64 = (0..20).map(|s| es_gradient_cosine(s, 20, 200, 0.1, true)).sum::<f64>() / 20.0;
    assert!(mean > 0.9, "mean cosine {mean}");
}

#[test]
fn constant_fitness_is_a_zero_mean_random_walk() {
    let (alpha, c, d, mu, sigma) = (0.01, 3.0, 10usize, 5usize, 0.5);
    let trials = 20_000;
    let group: Vec<usize> = (0..d).collect();
    let mut r = rng(9);
    let (mut sq, mut sum) = (0.0, vec![0.0; d]);
    for _ in 0..trials {
        let theta = ParameterVector::zeros(d);
        let pop = sample_population(&theta, &group, mu, sigma, &mut r).unwrap();
        let mut t = theta.clone();
        partial_gradient_update(&mut t, &group, &pop, &vec![c; mu], alpha, sigma).unwrap();
        sq += t.iter().map(|v| v * v).sum::<f64>();
        sum.iter_mut().zip(t.iter()).for_each(|(s, v)| *s += v);
    }
    let expected = alpha * alpha * c * c * d as f64 / (mu as f64 * sigma * sigma);
    let measured = sq / trials as f64;
    // The squared norm is a scaled χ²_d; its Monte-Carlo mean has ~1% relative error here.
    assert!((measured / expected - 1.0).abs() < 0.05, "{measured} vs {expected}");
    let step = (expected / d as f64).sqrt();
    for s in sum {
        assert!((s / trials as f64).abs() < 5.0 * step / (trials as f64).sqrt());
    }
}

#[test]
fn zero_policy_fitness_on_lqr_is_the_uncontrolled_cost() {
    let env = make_env(EnvName::Lqr, None).unwrap();
    let spec = PolicySpec {
        state_dim: 2,
        action_dim: 1,
        hidden_dims: vec![8],
        activation: Activation::Tanh,
    };
    let lqr = Lqr::new(LqrParams::default()).unwrap();
    let task = RolloutTask {
        env: env.as_ref(),
        policy_spec: spec.clone(),
        mode: ActMode::Deterministic,
        episodes: 1,
    };
    for seed in 0..5 {
        let report = task.evaluate(&ParameterVector::zeros(spec.param_count().unwrap()), seed).unwrap();
        let x0 = &report.trajectory[0].s;
        let expected = lqr.uncontrolled_return(x0);
        assert!((report.fitness - expected).abs() <= 1e-10 * expected.abs());
        assert_eq!(report.episode_len, 200);
    }
}

#[test]
fn every_index_updated_exactly_once_on_a_500_parameter_policy() {
    let env = make_env(EnvName::Pendulum, Some(5)).unwrap();
    let spec = spec_500();
    assert_eq!(spec.param_count().unwrap(), 500);
    let task = RolloutTask {
        env: env.as_ref(),
        policy_spec: spec.clone(),
        mode: ActMode::Stochastic,
        episodes: 1,
    };
    let mut r = rng(4);
    let mut theta = coerl::GaussianPolicy::init(&spec, &mut r).unwrap().theta().clone();
    for generation in 0..10 {
        let m = 2 + generation as usize % 3;
        assert_eq!(exactly_once_violations(&mut theta, &task, m, generation, &mut r), 0);
    }
}

#[test]
fn cascade_samples_around_the_already_updated_theta_and_fills_the_buffer() {
    let env = make_env(EnvName::PointMass, Some(7)).unwrap();
    let spec = PolicySpec {
        state_dim: 4,
        action_dim: 2,
        hidden_dims: vec![6],
        activation: Activation::Tanh,
    };
    let task = RolloutTask {
        env: env.as_ref(),
        policy_spec: spec.clone(),
        mode: ActMode::Stochastic,
        episodes: 1,
    };
    let mut r = rng(1);
    let mut theta = coerl::GaussianPolicy::init(&spec, &mut r).unwrap().theta().clone();
    let plan = random_grouping(theta.len(), 4, 0, &mut r).unwrap();
    let config = EsConfig { pop_size: 3, sigma: 0.1, alpha: 0.01, standardize_fitness: false, workers: 1 };
    let mut buffer = ReplayBuffer::new(10_000).unwrap();
    let mut afters: Vec<ParameterVector> = Vec::new();
    let mut befores: Vec<ParameterVector> = Vec::new();
    let mut observer = |e: &SubproblemEvent<'_>| -> coerl::Result<()> {
        befores.push(e.before.clone());
        afters.push(e.after.clone());
        Ok(())
    };
    let stats = coevolve_generation(&mut theta, &plan, &task, &config, Some(&mut buffer), &mut observer, &mut r).unwrap();
    for j in 1..4 {
        assert_eq!(befores[j], afters[j - 1]);
    }
    assert_eq!(afters[3], theta);
    assert_eq!(stats.env_steps, 4 * 3 * 7);
    assert_eq!(buffer.len() as u64, stats.env_steps);
}
