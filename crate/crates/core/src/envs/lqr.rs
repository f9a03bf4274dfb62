use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, EnvSpec, Environment, Transitioned, DEFAULT_HORIZON};
use crate::error::{Error, Result};

/// Discrete-time linear system `x' = A x + B u` with quadratic cost.
///
/// Reward at step t is `-(xₜᵀ Q xₜ + uₜᵀ R uₜ)` on the pre-step state, and the
/// episode sums exactly `horizon` such terms. Initial states are uniform on
/// `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrParams {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub action_limit: f64,
    pub horizon: usize,
}

impl Default for LqrParams {
    /// Damped double integrator, 2 states, 1 input.
    fn default() -> Self {
        Self {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.9]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_row_slice(1, 1, &[1.0]),
            action_limit: 3.0,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Finite-horizon Riccati recursion with zero terminal cost.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// `gains[t]` is the optimal feedback at step t: `uₜ = -gains[t] xₜ`.
    pub gains: Vec<DMatrix<f64>>,
    /// Cost-to-go matrix from t = 0.
    pub p0: DMatrix<f64>,
}

impl RiccatiSolution {
    /// Optimal (unconstrained) return from `x0`: `-x0ᵀ P₀ x0`.
    pub fn optimal_return(&self, x0: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x0);
        -(x.transpose() * &self.p0 * &x)[(0, 0)]
    }

    pub fn action(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (-(&self.gains[t] * x)).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct Lqr {
    params: LqrParams,
    spec: EnvSpec,
    bound: f64,
}

impl Lqr {
    pub fn new(params: LqrParams) -> Result<Self> {
        let n = params.a.nrows();
        let k = params.b.ncols();
        if params.a.ncols() != n
            || params.b.nrows() != n
            || params.q.shape() != (n, n)
            || params.r.shape() != (k, k)
        {
            return Err(Error::Config("inconsistent LQR matrix shapes".into()));
        }
        if !(params.action_limit > 0.0) {
            return Err(Error::Config("LQR action limit must be positive".into()));
        }
        let spec = EnvSpec {
            name: "lqr".into(),
            state_dim: n,
            action_dim: k,
            action_low: vec![-params.action_limit; k],
            action_high: vec![params.action_limit; k],
            horizon: params.horizon,
        };
        spec.validate()?;
        let bound = reward_bound(&params);
        Ok(Self { params, spec, bound })
    }

    pub fn params(&self) -> &LqrParams {
        &self.params
    }

    pub fn riccati(&self) -> RiccatiSolution {
        let p = &self.params;
        let n = p.a.nrows();
        let mut cost_to_go = DMatrix::<f64>::zeros(n, n);
        let mut gains = Vec::with_capacity(p.horizon);
        for _ in 0..p.horizon {
            let bt_p = p.b.transpose() * &cost_to_go;
            let s = &p.r + &bt_p * &p.b;
            let gain = s
                .lu()
                .solve(&(&bt_p * &p.a))
                .expect("R + BᵀPB is positive definite");
            cost_to_go = &p.q + p.a.transpose() * &cost_to_go * (&p.a - &p.b * &gain);
            cost_to_go = 0.5 * (&cost_to_go + cost_to_go.transpose());
            gains.push(gain);
        }
        gains.reverse();
        RiccatiSolution {
            gains,
            p0: cost_to_go,
        }
    }

    /// Return of the zero-input policy from `x0`.
    pub fn uncontrolled_return(&self, x0: &[f64]) -> f64 {
        let p = &self.params;
        let mut x = DVector::from_column_slice(x0);
        let mut total = 0.0;
        for _ in 0..p.horizon {
            total -= (x.transpose() * &p.q * &x)[(0, 0)];
            x = &p.a * x;
        }
        total
    }
}

/// Propagates an elementwise box on |x| through the worst case of the dynamics.
fn reward_bound(p: &LqrParams) -> f64 {
    let abs_a = p.a.abs();
    let abs_b = p.b.abs();
    let u = DVector::from_element(p.b.ncols(), p.action_limit);
    let mut x = DVector::from_element(p.a.nrows(), 1.0);
    let control = (u.transpose() * p.r.abs() * &u)[(0, 0)];
    let mut worst: f64 = 0.0;
    for _ in 0..=p.horizon {
        worst = worst.max((x.transpose() * p.q.abs() * &x)[(0, 0)] + control);
        x = &abs_a * x + &abs_b * &u;
    }
    worst
}

impl Environment for Lqr {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reward_bound(&self) -> f64 {
        self.bound
    }

    fn initial_physics(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        uniform_vec(rng, self.spec.state_dim, -1.0, 1.0)
    }

    fn observe(&self, physics: &[f64]) -> Vec<f64> {
        physics.to_vec()
    }

    fn advance(&self, physics: &[f64], action: &[f64]) -> Transitioned {
        let p = &self.params;
        let x = DVector::from_column_slice(physics);
        let u = DVector::from_column_slice(action);
        let cost = (x.transpose() * &p.q * &x)[(0, 0)] + (u.transpose() * &p.r * &u)[(0, 0)];
        let next = &p.a * &x + &p.b * &u;
        Transitioned {
            physics: next.iter().copied().collect(),
            reward: -cost,
            terminated: false,
        }
    }
}
