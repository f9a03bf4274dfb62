mod common;

use coerl::envs::make_env;
use coerl::nn::{Activation, MlpParams};
use coerl::policy::{ActMode, CriticPair, GaussianPolicy, PolicySpec};
use coerl::rollout::run_episode;
use coerl::sac::{compute_target_with_noise, rl_phase, soft_target, Batch};
use coerl::tensor::Tensor2;
use coerl::{EnvName, LearnerState, ParameterVector, ReplayBuffer, SacConfig, Transition};
use common::*;

fn spec() -> PolicySpec {
    PolicySpec {
        state_dim: 1,
        action_dim: 1,
        hidden_dims: vec![3],
        activation: Activation::Tanh,
    }
}

/// A network that ignores its input and returns `value`.
fn constant(net: MlpParams, value: f64) -> MlpParams {
    let mut theta = ParameterVector::zeros(net.theta().len());
    let last = net.spec().layers().last().unwrap().bias_offset;
    theta[last] = value;
    MlpParams::unflatten(net.spec().clone(), theta).unwrap()
}

/// Critics frozen at (1, 2) and a policy whose zero-noise sample has log π = 0.
fn hand_case_learner(gamma: f64) -> LearnerState {
    let spec = spec();
    let mut r = rng(0);
    let critics = CriticPair::init(&spec, &mut r).unwrap();
    let critics = CriticPair::new(constant(critics.q1, 1.0), constant(critics.q2, 2.0)).unwrap();
    let trunk = MlpParams::zeros(spec.trunk_spec().unwrap()).unwrap();
    let mut theta = trunk.theta().clone();
    // Output 1 is log std: log π(0) = -log std - ½ log 2π - log(1 + 1e-6) = 0.
    let last = trunk.spec().layers().last().unwrap().bias_offset;
    theta[last + 1] = -0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0f64 + 1e-6).ln();
    let policy = GaussianPolicy::from_theta(&spec, theta).unwrap();
    let config = SacConfig { gamma, alpha_s: 0.2, ..SacConfig::default() };
    LearnerState::new(policy, critics, &config).unwrap()
}

fn one(r: f64, done: bool) -> Batch {
    let t = Transition { s: vec![0.3], a: vec![0.1], r, s_next: vec![-0.2], done };
    Batch::from_transitions(&[&t]).unwrap()
}

#[test]
fn hand_case_target_is_1_49() {
    let learner = hand_case_learner(0.99);
    let zero = Tensor2::zeros(1, 1);
    let (sample, _) = learner.policy.sample_batch(&Tensor2::from_vec(1, 1, vec![-0.2]).unwrap(), &zero).unwrap();
    assert!(sample.log_probs[0].abs() < 1e-12);
    let y = compute_target_with_noise(&learner, &one(0.5, false), &zero).unwrap()[0];
    assert!((y - 1.49).abs() < 1e-12, "{y}");
}

#[test]
fn terminal_and_undiscounted_rules_through_the_full_path() {
    let zero = Tensor2::zeros(1, 1);
    let y = compute_target_with_noise(&hand_case_learner(0.99), &one(0.5, true), &zero).unwrap()[0];
    assert!((y - 0.5).abs() < 1e-12);
    let y = compute_target_with_noise(&hand_case_learner(0.0), &one(-0.7, false), &zero).unwrap()[0];
    assert!((y + 0.7).abs() < 1e-12);
    assert_eq!(soft_target(0.5, false, 0.99, 0.2, 1.0, 0.0), 0.5 + 0.99 * 1.0);
    assert_eq!(soft_target(0.5, false, 0.99, 0.2, 1.0, 2.0), 0.5 + 0.99 * (1.0 - 0.4));
}

/// Critic regression against Monte-Carlo returns on LQR. The buffer is filled by the
/// learner's own (practically frozen) policy so that Q^π is what the returns estimate.
#[test]
fn critics_learn_monte_carlo_returns_on_lqr() {
    let env = make_env(EnvName::Lqr, Some(150)).unwrap();
    let spec = PolicySpec {
        state_dim: 2,
        action_dim: 1,
        hidden_dims: vec![32, 32],
        activation: Activation::Tanh,
    };
    let gamma = 0.9;
    let mut r = rng(5);
    let policy = GaussianPolicy::init(&spec, &mut r).unwrap();
    let critics = CriticPair::init(&spec, &mut r).unwrap();
    let config = SacConfig {
        gamma,
        alpha_s: 0.0,
        lr_actor: 1e-12,
        lr_critic: 1e-3,
        ..SacConfig::default()
    };
    let mut learner = LearnerState::new(policy.clone(), critics, &config).unwrap();

    let mut buffer = ReplayBuffer::new(100_000).unwrap();
    let mut probes: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for seed in 0..40 {
        let ep = run_episode(env.as_ref(), &policy, ActMode::Stochastic, seed).unwrap();
        // Discounted return-to-go; the first 50 steps are far enough from the
        // truncation that γ^100 ≈ 3e-5 makes the cut invisible.
        let mut g = 0.0;
        let mut togo = vec![0.0; ep.len()];
        for t in (0..ep.len()).rev() {
            g = ep.transitions[t].r + gamma * g;
            togo[t] = g;
        }
        for t in 0..50 {
            let tr = &ep.transitions[t];
            probes.push((tr.s.clone(), tr.a.clone(), togo[t]));
        }
        buffer.extend(ep.transitions);
    }
    let mse = |l: &LearnerState| {
        probes
            .iter()
            .map(|(s, a, g)| {
                let (q1, _) = l.critics.q_value(s, a).unwrap();
                (q1 - g).powi(2)
            })
            .sum::<f64>()
            / probes.len() as f64
    };
    let before = mse(&learner);
    rl_phase(&mut learner, &buffer, 5_000, 64, &mut r).unwrap();
    let after = mse(&learner);
    assert!(after * 10.0 <= before, "MSE {before} -> {after}");
}
