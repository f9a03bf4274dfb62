//! Tanh-squashed Gaussian actor and twin Q-critics.
//!
//! The actor trunk emits `2 · action_dim` values per state: the first half is
//! the pre-squash mean, the second half the log standard deviation (clamped
//! to `[LOG_STD_MIN, LOG_STD_MAX]`). A sample is `u = mean + std · ξ`,
//! `a = tanh(u)`, and its log-density carries the change-of-variables term
//! `-Σ log(1 - tanh(u)² + TANH_EPS)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::{Activation, ForwardCache, MlpParams, MlpSpec};
use crate::tensor::{ParameterVector, Tensor2};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const TANH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    #[default]
    Stochastic,
    Deterministic,
}

/// Shape of an actor, enough to rebuild it from a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
}

impl PolicySpec {
    pub fn trunk_spec(&self) -> Result<MlpSpec> {
        MlpSpec::new(
            self.state_dim,
            self.hidden_dims.clone(),
            2 * self.action_dim,
            self.activation,
        )
    }

    pub fn critic_spec(&self) -> Result<MlpSpec> {
        MlpSpec::new(
            self.state_dim + self.action_dim,
            self.hidden_dims.clone(),
            1,
            self.activation,
        )
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.trunk_spec()?.param_count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    trunk: MlpParams,
    action_dim: usize,
}

/// A batch of reparameterized samples and everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub actions: Tensor2,
    pub log_probs: Vec<f64>,
    noise: Tensor2,
    std: Tensor2,
    log_std_active: Vec<bool>,
}

impl GaussianPolicy {
    pub fn new(trunk: MlpParams, action_dim: usize) -> Result<Self> {
        if action_dim == 0 {
            return Err(Error::InvalidInput("action_dim must be at least 1".into()));
        }
        check_dim("policy trunk output", 2 * action_dim, trunk.spec().output_dim)?;
        Ok(Self { trunk, action_dim })
    }

    pub fn init<R: Rng + ?Sized>(spec: &PolicySpec, rng: &mut R) -> Result<Self> {
        Self::new(MlpParams::init(spec.trunk_spec()?, rng)?, spec.action_dim)
    }

    pub fn from_theta(spec: &PolicySpec, theta: ParameterVector) -> Result<Self> {
        Self::new(MlpParams::unflatten(spec.trunk_spec()?, theta)?, spec.action_dim)
    }

    pub fn spec(&self) -> PolicySpec {
        let t = self.trunk.spec();
        PolicySpec {
            state_dim: t.input_dim,
            action_dim: self.action_dim,
            hidden_dims: t.hidden_dims.clone(),
            activation: t.activation,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.trunk.spec().input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn trunk(&self) -> &MlpParams {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut MlpParams {
        &mut self.trunk
    }

    pub fn theta(&self) -> &ParameterVector {
        self.trunk.theta()
    }

    /// Draws an action in `(-1, 1)^action_dim` and its log-density.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        let head = self.trunk.predict(state)?;
        let noise: Vec<f64> = match mode {
            ActMode::Stochastic => (0..self.action_dim)
                .map(|_| rng.sample(StandardNormal))
                .collect(),
            ActMode::Deterministic => vec![0.0; self.action_dim],
        };
        let (mean, raw_log_std) = head.split_at(self.action_dim);
        let mut action = Vec::with_capacity(self.action_dim);
        let mut log_prob = 0.0;
        for k in 0..self.action_dim {
            let log_std = raw_log_std[k].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let u = mean[k] + log_std.exp() * noise[k];
            let a = u.tanh();
            log_prob += gaussian_term(noise[k], log_std) - (1.0 - a * a + TANH_EPS).ln();
            action.push(a);
        }
        Ok((action, log_prob))
    }

    /// Stochastic sample with its log-density; the single sampling path used by
    /// both the soft target and the actor objective.
    pub fn policy_entropy_term<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        self.act(state, ActMode::Stochastic, rng)
    }

    /// Pre-squash mean and clamped log standard deviation for one state.
    pub fn distribution(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let head = self.trunk.predict(state)?;
        let (mean, raw) = head.split_at(self.action_dim);
        Ok((
            mean.to_vec(),
            raw.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
        ))
    }

    /// Reparameterized samples for a batch of states with caller-supplied
    /// standard-normal noise (one row per state).
    pub fn sample_batch(&self, states: &Tensor2, noise: &Tensor2) -> Result<(SampleBatch, ForwardCache)> {
        check_dim("noise columns", self.action_dim, noise.cols())?;
        check_dim("noise rows", states.rows(), noise.rows())?;
        let (head, cache) = self.trunk.forward_batch(states)?;
        let n = states.rows();
        let d = self.action_dim;
        let mut actions = Tensor2::zeros(n, d);
        let mut std = Tensor2::zeros(n, d);
        let mut log_probs = Vec::with_capacity(n);
        let mut log_std_active = Vec::with_capacity(n * d);
        for r in 0..n {
            let row = head.row(r);
            let mut lp = 0.0;
            for k in 0..d {
                let raw = row[d + k];
                log_std_active.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&raw));
                let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let s = log_std.exp();
                let xi = noise.get(r, k);
                let a = (row[k] + s * xi).tanh();
                lp += gaussian_term(xi, log_std) - (1.0 - a * a + TANH_EPS).ln();
                actions.set(r, k, a);
                std.set(r, k, s);
            }
            log_probs.push(lp);
        }
        Ok((
            SampleBatch {
                actions,
                log_probs,
                noise: noise.clone(),
                std,
                log_std_active,
            },
            cache,
        ))
    }

    /// Gradient w.r.t. the trunk parameters of
    /// `Σ_b (action_grad_b · a_b + log_prob_grad_b · log π(a_b | s_b))`,
    /// differentiating through the sample with the noise held fixed.
    pub fn reparam_backward(
        &self,
        sample: &SampleBatch,
        cache: &ForwardCache,
        action_grad: &Tensor2,
        log_prob_grad: &[f64],
    ) -> Result<ParameterVector> {
        let n = sample.actions.rows();
        let d = self.action_dim;
        check_dim("action gradient rows", n, action_grad.rows())?;
        check_dim("action gradient columns", d, action_grad.cols())?;
        check_dim("log-prob gradient", n, log_prob_grad.len())?;
        let mut head_grad = Tensor2::zeros(n, 2 * d);
        for r in 0..n {
            let glp = log_prob_grad[r];
            for k in 0..d {
                let a = sample.actions.get(r, k);
                let one_minus = 1.0 - a * a;
                // d/du of [g_a · tanh(u) - g_lp · log(1 - tanh(u)² + eps)]
                let du = action_grad.get(r, k) * one_minus
                    + glp * 2.0 * a * one_minus / (one_minus + TANH_EPS);
                head_grad.set(r, k, du);
                if sample.log_std_active[r * d + k] {
                    let dls = du * sample.std.get(r, k) * sample.noise.get(r, k) - glp;
                    head_grad.set(r, d + k, dls);
                }
            }
        }
        let (grad, _) = self.trunk.backward_batch(cache, &head_grad)?;
        Ok(grad)
    }
}

/// log N(u; mean, std) written through the standardized noise ξ = (u - mean)/std.
fn gaussian_term(xi: f64, log_std: f64) -> f64 {
    -0.5 * xi * xi - log_std - 0.5 * (2.0 * PI).ln()
}

/// Two Q-networks over `state ‖ action`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub q1: MlpParams,
    pub q2: MlpParams,
}

impl CriticPair {
    pub fn new(q1: MlpParams, q2: MlpParams) -> Result<Self> {
        if q1.spec() != q2.spec() {
            return Err(Error::InvalidInput("critics must share one architecture".into()));
        }
        check_dim("critic output", 1, q1.spec().output_dim)?;
        Ok(Self { q1, q2 })
    }

    pub fn init<R: Rng + ?Sized>(spec: &PolicySpec, rng: &mut R) -> Result<Self> {
        let cs = spec.critic_spec()?;
        Self::new(MlpParams::init(cs.clone(), rng)?, MlpParams::init(cs, rng)?)
    }

    pub fn input_dim(&self) -> usize {
        self.q1.spec().input_dim
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        check_dim("critic input", self.input_dim(), state.len() + action.len())?;
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        Ok((self.q1.predict(&input)?[0], self.q2.predict(&input)?[0]))
    }

    pub fn swapped(&self) -> Self {
        Self {
            q1: self.q2.clone(),
            q2: self.q1.clone(),
        }
    }
}
