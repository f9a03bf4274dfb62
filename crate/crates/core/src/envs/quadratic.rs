use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::ParameterVector;

/// Pure fitness `f(ψ) = -‖ψ - ψ*‖²` around a seeded hidden optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    optimum: ParameterVector,
}

impl QuadraticTask {
    /// Optimum drawn uniformly from `[-1, 1]^dim`.
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            optimum: (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect::<Vec<_>>().into(),
        }
    }

    pub fn with_optimum(optimum: ParameterVector) -> Self {
        Self { optimum }
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn optimum(&self) -> &ParameterVector {
        &self.optimum
    }

    pub fn fitness(&self, psi: &[f64]) -> f64 {
        -psi.iter()
            .zip(self.optimum.iter())
            .map(|(p, o)| (p - o) * (p - o))
            .sum::<f64>()
    }

    /// `∇f(ψ) = 2 (ψ* - ψ)`.
    pub fn gradient(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter()
            .zip(self.optimum.iter())
            .map(|(p, o)| 2.0 * (o - p))
            .collect()
    }
}
