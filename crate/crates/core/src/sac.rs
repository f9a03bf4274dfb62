//! Off-policy soft actor-critic over the evolution-collected buffer.
//!
//! Per update: sample a minibatch, form soft targets
//! `y = r + γ (min_j Q̄_j(s', ã') - α_s log π(ã'|s'))` (`y = r` on termination),
//! regress both critics onto `y`, ascend
//! `min_j Q_j(s, ã) - α_s log π(ã|s)` through the reparameterized sample, and
//! move the target critics toward the online ones.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::optim::{Optimizer, OptimizerKind};
use crate::policy::{CriticPair, GaussianPolicy};
use crate::replay::{ReplayBuffer, Transition};
use crate::tensor::{ParameterVector, Tensor2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub gamma: f64,
    pub alpha_s: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub polyak_tau: f64,
    pub use_target_critics: bool,
    pub optimizer: OptimizerKind,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha_s: 0.2,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            polyak_tau: 0.005,
            use_target_critics: true,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.alpha_s >= 0.0) {
            return Err(Error::Config(format!("alpha_s must be non-negative, got {}", self.alpha_s)));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        check_tau(self.polyak_tau)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("polyak tau must lie in (0, 1], got {tau}")))
    }
}

#[derive(Debug, Clone)]
pub struct LearnerState {
    pub policy: GaussianPolicy,
    pub critics: CriticPair,
    pub target_critics: CriticPair,
    pub alpha_s: f64,
    pub gamma: f64,
    pub polyak_tau: f64,
    pub use_target_critics: bool,
    actor_opt: Optimizer,
    q1_opt: Optimizer,
    q2_opt: Optimizer,
}

impl LearnerState {
    pub fn new(policy: GaussianPolicy, critics: CriticPair, config: &SacConfig) -> Result<Self> {
        config.validate()?;
        if critics.input_dim() != policy.state_dim() + policy.action_dim() {
            return Err(Error::InvalidInput(
                "critic input must be state ‖ action of the policy".into(),
            ));
        }
        let n_actor = policy.theta().len();
        let n_critic = critics.q1.theta().len();
        Ok(Self {
            target_critics: critics.clone(),
            policy,
            critics,
            alpha_s: config.alpha_s,
            gamma: config.gamma,
            polyak_tau: config.polyak_tau,
            use_target_critics: config.use_target_critics,
            actor_opt: Optimizer::new(config.optimizer, config.lr_actor, n_actor),
            q1_opt: Optimizer::new(config.optimizer, config.lr_critic, n_critic),
            q2_opt: Optimizer::new(config.optimizer, config.lr_critic, n_critic),
        })
    }

    /// Critics used to form targets: the slow copies, or the online critics
    /// when target networks are disabled.
    pub fn bootstrap_critics(&self) -> &CriticPair {
        if self.use_target_critics {
            &self.target_critics
        } else {
            &self.critics
        }
    }
}

/// A minibatch in matrix form.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Tensor2,
    pub actions: Tensor2,
    pub rewards: Vec<f64>,
    pub next_states: Tensor2,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let states: Vec<&[f64]> = items.iter().map(|t| t.s.as_slice()).collect();
        let actions: Vec<&[f64]> = items.iter().map(|t| t.a.as_slice()).collect();
        let next: Vec<&[f64]> = items.iter().map(|t| t.s_next.as_slice()).collect();
        Ok(Self {
            states: Tensor2::from_rows(&states)?,
            actions: Tensor2::from_rows(&actions)?,
            rewards: items.iter().map(|t| t.r).collect(),
            next_states: Tensor2::from_rows(&next)?,
            dones: items.iter().map(|t| t.done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// The soft target for one transition.
pub fn soft_target(r: f64, done: bool, gamma: f64, alpha_s: f64, q_min: f64, log_prob: f64) -> f64 {
    if done {
        r
    } else {
        r + gamma * (q_min - alpha_s * log_prob)
    }
}

fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor2::from_vec(rows, cols, data).expect("shape matches")
}

fn q_batch(q: &MlpParams, input: &Tensor2) -> Result<Vec<f64>> {
    let (out, _) = q.forward_batch(input)?;
    Ok(out.into_data())
}

pub fn compute_target<R: Rng + ?Sized>(learner: &LearnerState, batch: &Batch, rng: &mut R) -> Result<Vec<f64>> {
    let noise = standard_normal(batch.len(), learner.policy.action_dim(), rng);
    compute_target_with_noise(learner, batch, &noise)
}

/// Targets with the next-action noise supplied by the caller.
pub fn compute_target_with_noise(learner: &LearnerState, batch: &Batch, noise: &Tensor2) -> Result<Vec<f64>> {
    let (sample, _) = learner.policy.sample_batch(&batch.next_states, noise)?;
    let input = Tensor2::hconcat(&batch.next_states, &sample.actions)?;
    let critics = learner.bootstrap_critics();
    let q1 = q_batch(&critics.q1, &input)?;
    let q2 = q_batch(&critics.q2, &input)?;
    Ok((0..batch.len())
        .map(|b| {
            soft_target(
                batch.rewards[b],
                batch.dones[b],
                learner.gamma,
                learner.alpha_s,
                q1[b].min(q2[b]),
                sample.log_probs[b],
            )
        })
        .collect())
}

/// Mean squared error of one critic against fixed targets, and its gradient.
pub fn critic_loss_and_grad(q: &MlpParams, batch: &Batch, targets: &[f64]) -> Result<(f64, ParameterVector)> {
    if targets.len() != batch.len() {
        return Err(Error::ContractViolation(format!(
            "{} targets for a batch of {}",
            targets.len(),
            batch.len()
        )));
    }
    let input = Tensor2::hconcat(&batch.states, &batch.actions)?;
    let (pred, cache) = q.forward_batch(&input)?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut out_grad = Tensor2::zeros(batch.len(), 1);
    for (b, (&p, &y)) in pred.data().iter().zip(targets).enumerate() {
        let err = p - y;
        loss += err * err / n;
        out_grad.set(b, 0, 2.0 * err / n);
    }
    let (grad, _) = q.backward_batch(&cache, &out_grad)?;
    Ok((loss, grad))
}

/// One descent step for each critic; returns the pre-step losses.
pub fn critic_step(learner: &mut LearnerState, batch: &Batch, targets: &[f64]) -> Result<(f64, f64)> {
    let (loss1, g1) = critic_loss_and_grad(&learner.critics.q1, batch, targets)?;
    let (loss2, g2) = critic_loss_and_grad(&learner.critics.q2, batch, targets)?;
    learner.q1_opt.step(learner.critics.q1.theta_mut(), &g1)?;
    learner.q2_opt.step(learner.critics.q2.theta_mut(), &g2)?;
    Ok((loss1, loss2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorObjective {
    pub value: f64,
    /// Mean of `-log π(ã|s)` over the batch.
    pub entropy: f64,
}

/// The actor objective on `states` under fixed `noise`, and its gradient with
/// respect to the policy parameters (ascent direction).
pub fn actor_objective_and_grad(
    policy: &GaussianPolicy,
    critics: &CriticPair,
    alpha_s: f64,
    states: &Tensor2,
    noise: &Tensor2,
) -> Result<(ActorObjective, ParameterVector)> {
    let n = states.rows();
    let inv_n = 1.0 / n as f64;
    let sd = policy.state_dim();
    let ad = policy.action_dim();
    let (sample, actor_cache) = policy.sample_batch(states, noise)?;
    let input = Tensor2::hconcat(states, &sample.actions)?;
    let (q1, c1) = critics.q1.forward_batch(&input)?;
    let (q2, c2) = critics.q2.forward_batch(&input)?;

    let mut g1 = Tensor2::zeros(n, 1);
    let mut g2 = Tensor2::zeros(n, 1);
    let mut value = 0.0;
    let mut entropy = 0.0;
    for b in 0..n {
        let (a, c) = (q1.get(b, 0), q2.get(b, 0));
        if a <= c {
            g1.set(b, 0, inv_n);
        } else {
            g2.set(b, 0, inv_n);
        }
        value += inv_n * (a.min(c) - alpha_s * sample.log_probs[b]);
        entropy -= inv_n * sample.log_probs[b];
    }
    let (_, dx1) = critics.q1.backward_batch(&c1, &g1)?;
    let (_, dx2) = critics.q2.backward_batch(&c2, &g2)?;
    let mut action_grad = Tensor2::zeros(n, ad);
    for b in 0..n {
        for k in 0..ad {
            action_grad.set(b, k, dx1.get(b, sd + k) + dx2.get(b, sd + k));
        }
    }
    let log_prob_grad = vec![-alpha_s * inv_n; n];
    let grad = policy.reparam_backward(&sample, &actor_cache, &action_grad, &log_prob_grad)?;
    Ok((ActorObjective { value, entropy }, grad))
}

/// One ascent step on the actor with the critics held fixed.
pub fn actor_step<R: Rng + ?Sized>(learner: &mut LearnerState, batch: &Batch, rng: &mut R) -> Result<ActorObjective> {
    let noise = standard_normal(batch.len(), learner.policy.action_dim(), rng);
    actor_step_with_noise(learner, batch, &noise)
}

pub fn actor_step_with_noise(learner: &mut LearnerState, batch: &Batch, noise: &Tensor2) -> Result<ActorObjective> {
    let (objective, mut grad) =
        actor_objective_and_grad(&learner.policy, &learner.critics, learner.alpha_s, &batch.states, noise)?;
    grad.iter_mut().for_each(|g| *g = -*g);
    learner
        .actor_opt
        .step(learner.policy.trunk_mut().theta_mut(), &grad)?;
    Ok(objective)
}

/// `target ← (1 - tau) · target + tau · online`, elementwise.
pub fn polyak_update(target: &mut CriticPair, online: &CriticPair, tau: f64) -> Result<()> {
    check_tau(tau)?;
    for (t, o) in [(&mut target.q1, &online.q1), (&mut target.q2, &online.q2)] {
        if tau == 1.0 {
            t.set_theta(o.theta().clone())?;
            continue;
        }
        let src = o.theta();
        if src.len() != t.theta().len() {
            return Err(Error::DimensionMismatch {
                what: "target critic",
                expected: t.theta().len(),
                actual: src.len(),
            });
        }
        for (tv, ov) in t.theta_mut().iter_mut().zip(src.iter()) {
            *tv = (1.0 - tau) * *tv + tau * ov;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RlStats {
    pub steps: usize,
    pub skipped: usize,
    pub critic_loss1: Option<f64>,
    pub critic_loss2: Option<f64>,
    pub actor_objective: Option<f64>,
    pub entropy: Option<f64>,
    pub buffer_size: usize,
}

/// Runs `steps` soft actor-critic updates. Does nothing (and reports every
/// step as skipped) while the buffer holds fewer than `batch_size` items.
pub fn rl_phase<R: Rng + ?Sized>(
    learner: &mut LearnerState,
    buffer: &ReplayBuffer,
    steps: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<RlStats> {
    let mut stats = RlStats {
        buffer_size: buffer.len(),
        ..RlStats::default()
    };
    if steps == 0 {
        return Ok(stats);
    }
    if buffer.len() < batch_size || batch_size == 0 {
        stats.skipped = steps;
        return Ok(stats);
    }
    let (mut l1, mut l2, mut obj, mut ent) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..steps {
        let items = buffer.sample(batch_size, rng)?;
        let batch = Batch::from_transitions(&items)?;
        let targets = compute_target(learner, &batch, rng)?;
        let (a, b) = critic_step(learner, &batch, &targets)?;
        let o = actor_step(learner, &batch, rng)?;
        if learner.use_target_critics {
            polyak_update(&mut learner.target_critics, &learner.critics, learner.polyak_tau)?;
        }
        l1 += a;
        l2 += b;
        obj += o.value;
        ent += o.entropy;
    }
    let n = steps as f64;
    stats.steps = steps;
    stats.critic_loss1 = Some(l1 / n);
    stats.critic_loss2 = Some(l2 / n);
    stats.actor_objective = Some(obj / n);
    stats.entropy = Some(ent / n);
    Ok(stats)
}
