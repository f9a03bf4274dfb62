//! Cooperative coevolutionary reinforcement learning.
//!
//! A policy's flat parameter vector is split every generation into random
//! disjoint groups. Each group gets its own sampled population and takes an
//! evolution-strategies step on its own coordinates while the rest of the
//! vector stays frozen. Every transition the populations experience is then
//! replayed by a soft actor-critic learner that refines the same policy.
//!
//! Module map:
//! - [`nn`], [`tensor`]: dense MLPs with hand-written backpropagation
//! - [`policy`]: tanh-squashed Gaussian actor and twin critics
//! - [`decomposition`]: random grouping plans
//! - [`es`]: population sampling, evaluation and partial gradient updates
//! - [`sac`], [`replay`]: the off-policy learner and its buffer
//! - [`envs`]: toy control tasks and the quadratic fitness task
//! - [`harness`]: configuration, the training loop, checkpoints and metrics

pub mod decomposition;
pub mod envs;
pub mod error;
pub mod es;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod replay;
pub mod rollout;
pub mod sac;
pub mod tensor;

pub use decomposition::{draw_group_count, random_grouping, GroupingPlan, Violation};
pub use envs::{make_env, EnvName, EnvSpec, EnvState, Environment, QuadraticTask};
pub use error::{Error, Result};
pub use es::{
    coevolve_generation, partial_gradient_update, sample_population, EsConfig, FitnessReport,
    FitnessTask, GenerationStats, Perturbation,
};
pub use harness::{Mode, TrainerConfig};
pub use nn::{Activation, MlpParams, MlpSpec};
pub use policy::{ActMode, CriticPair, GaussianPolicy, PolicySpec};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{LearnerState, SacConfig};
pub use tensor::{ParameterVector, Tensor2};
