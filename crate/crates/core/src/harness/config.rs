use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::es::EsConfig;
use crate::nn::Activation;
use crate::optim::OptimizerKind;
use crate::policy::ActMode;
use crate::sac::SacConfig;

/// Which parts of the algorithm run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Grouped evolution followed by soft actor-critic.
    #[default]
    Coerl,
    /// Grouped evolution only.
    Coes,
    /// Whole-vector evolution followed by soft actor-critic.
    Essac,
    /// Whole-vector evolution only.
    Es,
    /// Soft actor-critic collecting with its own policy.
    Sac,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Coerl, Mode::Coes, Mode::Essac, Mode::Es, Mode::Sac];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Coerl => "coerl",
            Mode::Coes => "coes",
            Mode::Essac => "essac",
            Mode::Es => "es",
            Mode::Sac => "sac",
        }
    }

    pub fn evolves(self) -> bool {
        self != Mode::Sac
    }

    pub fn learns(self) -> bool {
        matches!(self, Mode::Coerl | Mode::Essac | Mode::Sac)
    }

    pub fn single_group(self) -> bool {
        matches!(self, Mode::Essac | Mode::Es)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// How many soft actor-critic updates follow each generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RlSteps {
    /// One update per environment step collected in the generation.
    #[default]
    MatchEnvSteps,
    Fixed(usize),
    /// `round(ratio · env steps collected)`.
    Ratio(f64),
}

impl RlSteps {
    pub fn resolve(self, env_steps: u64) -> usize {
        match self {
            RlSteps::MatchEnvSteps => env_steps as usize,
            RlSteps::Fixed(n) => n,
            RlSteps::Ratio(r) => (r * env_steps as f64).round() as usize,
        }
    }
}

/// Every knob of a training run. Serialized as JSON with these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub env: EnvName,
    /// Overrides the environment's default horizon.
    pub horizon: Option<usize>,
    /// Dimension of the quadratic task's parameter vector.
    pub quadratic_dim: usize,
    pub mode: Mode,
    pub seed: u64,
    pub total_generations: u64,
    /// Stop after the generation in which this many training env steps accrue.
    pub max_env_steps: Option<u64>,

    pub pop_size: usize,
    pub sigma: f64,
    pub es_lr: f64,
    pub standardize_fitness: bool,
    pub episodes_per_individual: usize,
    pub evolution_act_mode: ActMode,
    pub grouping_candidates: Vec<usize>,
    pub fixed_m: Option<usize>,

    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_s: f64,
    pub gamma: f64,
    pub polyak_tau: f64,
    pub use_target_critics: bool,
    pub optimizer: OptimizerKind,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub rl_steps_per_generation: RlSteps,
    /// Episodes the learner collects per generation in `sac` mode
    /// (defaults to the population size).
    pub sac_episodes_per_generation: Option<usize>,

    pub hidden_dims: Vec<usize>,
    pub activation: Activation,

    pub eval_every: u64,
    pub eval_episodes: usize,
    pub checkpoint_every: u64,
    /// Also checkpoint θ after every subproblem of checkpointed generations.
    pub stage_checkpoints: bool,
    /// Log full index lists of every grouping plan, not just the sizes.
    pub log_full_groups: bool,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            env: EnvName::Pendulum,
            horizon: None,
            quadratic_dim: 50,
            mode: Mode::Coerl,
            seed: 0,
            total_generations: 100,
            max_env_steps: None,
            pop_size: 6,
            sigma: 1.0,
            es_lr: 1e-3,
            standardize_fitness: false,
            episodes_per_individual: 1,
            evolution_act_mode: ActMode::Stochastic,
            grouping_candidates: vec![2, 3, 4],
            fixed_m: None,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            alpha_s: 0.2,
            gamma: 0.99,
            polyak_tau: 0.005,
            use_target_critics: true,
            optimizer: OptimizerKind::Adam,
            buffer_capacity: 100_000,
            batch_size: 256,
            rl_steps_per_generation: RlSteps::MatchEnvSteps,
            sac_episodes_per_generation: None,
            hidden_dims: vec![64, 64],
            activation: Activation::Relu,
            eval_every: 5,
            eval_episodes: 5,
            checkpoint_every: 5,
            stage_checkpoints: false,
            log_full_groups: false,
            workers: 1,
            out_dir: None,
        }
    }
}

impl TrainerConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("es_lr", self.es_lr),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pop_size < 2 {
            return Err(Error::Config("pop_size must be at least 2".into()));
        }
        if self.grouping_candidates.is_empty() || self.grouping_candidates.contains(&0) {
            return Err(Error::Config("grouping_candidates must be nonempty and positive".into()));
        }
        if self.fixed_m == Some(0) {
            return Err(Error::Config("fixed_m must be at least 1".into()));
        }
        if self.episodes_per_individual == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("episode counts must be at least 1".into()));
        }
        if self.eval_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("eval_every and checkpoint_every must be at least 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("batch_size and buffer_capacity must be positive".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if let RlSteps::Ratio(r) = self.rl_steps_per_generation {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("rl step ratio must be non-negative, got {r}")));
            }
        }
        if self.env == EnvName::Quadratic {
            if self.mode.learns() {
                return Err(Error::Config(format!(
                    "mode {} needs a rollout environment; the quadratic task supports es and coes",
                    self.mode
                )));
            }
            if self.quadratic_dim == 0 {
                return Err(Error::Config("quadratic_dim must be positive".into()));
            }
        }
        if self.mode.learns() {
            self.sac_config().validate()?;
        }
        Ok(())
    }

    /// Group counts in effect for this mode.
    pub fn effective_candidates(&self) -> Vec<usize> {
        if self.mode.single_group() {
            vec![1]
        } else if let Some(m) = self.fixed_m {
            vec![m]
        } else {
            self.grouping_candidates.clone()
        }
    }

    pub fn es_config(&self) -> EsConfig {
        EsConfig {
            pop_size: self.pop_size,
            sigma: self.sigma,
            alpha: self.es_lr,
            standardize_fitness: self.standardize_fitness,
            workers: self.workers.max(1),
        }
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            alpha_s: self.alpha_s,
            lr_actor: self.actor_lr,
            lr_critic: self.critic_lr,
            polyak_tau: self.polyak_tau,
            use_target_critics: self.use_target_critics,
            optimizer: self.optimizer,
        }
    }

    /// Digest of every setting that can influence results. The output
    /// directory and worker count are excluded.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        canonical.workers = 1;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}
