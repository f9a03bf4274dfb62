//! Fixtures shared by the benchmarks.

use coerl::es::{sample_population, Perturbation};
use coerl::{ParameterVector, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A θ of length `dim`, a whole-vector population of `mu` and fitness values.
pub fn update_fixture(dim: usize, mu: usize) -> (ParameterVector, Vec<usize>, Vec<Perturbation>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
    let theta: ParameterVector = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>().into();
    let group: Vec<usize> = (0..dim).collect();
    let population = sample_population(&theta, &group, mu, 1.0, &mut rng).unwrap();
    let fitnesses = (0..mu).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (theta, group, population, fitnesses)
}

pub fn random_transitions(n: usize, state_dim: usize, action_dim: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = |k: usize| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    (0..n)
        .map(|_| Transition {
            s: v(state_dim),
            a: v(action_dim),
            r: v(1)[0],
            s_next: v(state_dim),
            done: false,
        })
        .collect()
}
