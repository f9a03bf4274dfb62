//! Per-generation CSV records and the JSONL event log.
//!
//! `metrics.csv` columns, in order:
//! generation, env_steps, eval_env_steps, m, group_sizes, best_fitness,
//! mean_fitness, update_norm, eval_mean, eval_std, eval_min, eval_max,
//! critic_loss1, critic_loss2, actor_objective, entropy, rl_steps, buffer_size.
//!
//! `env_steps` is the cumulative training budget; evaluation episodes are
//! counted separately in `eval_env_steps`. Empty cells mean "not measured
//! this generation". `group_sizes` is `;`-separated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::es::SubproblemStats;
use crate::sac::RlStats;

pub const METRICS_COLUMNS: [&str; 18] = [
    "generation",
    "env_steps",
    "eval_env_steps",
    "m",
    "group_sizes",
    "best_fitness",
    "mean_fitness",
    "update_norm",
    "eval_mean",
    "eval_std",
    "eval_min",
    "eval_max",
    "critic_loss1",
    "critic_loss2",
    "actor_objective",
    "entropy",
    "rl_steps",
    "buffer_size",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub generation: u64,
    pub env_steps: u64,
    pub eval_env_steps: u64,
    pub m: usize,
    pub group_sizes: String,
    pub best_fitness: Option<f64>,
    pub mean_fitness: Option<f64>,
    pub update_norm: Option<f64>,
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
    pub eval_min: Option<f64>,
    pub eval_max: Option<f64>,
    pub critic_loss1: Option<f64>,
    pub critic_loss2: Option<f64>,
    pub actor_objective: Option<f64>,
    pub entropy: Option<f64>,
    pub rl_steps: usize,
    pub buffer_size: usize,
}

pub fn join_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    /// Creates the file and writes the header row.
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        inner.write_record(METRICS_COLUMNS)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    RunStarted {
        config_hash: String,
        mode: String,
        env: String,
        seed: u64,
        param_count: usize,
    },
    Grouping {
        generation: u64,
        plan_seed: u64,
        m: usize,
        group_sizes: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        groups: Option<Vec<Vec<usize>>>,
    },
    Subproblems {
        generation: u64,
        stats: Vec<SubproblemStats>,
    },
    RlPhase {
        generation: u64,
        stats: RlStats,
    },
    Evaluation {
        generation: u64,
        mean: f64,
        std: f64,
        min: f64,
        max: f64,
        returns: Vec<f64>,
    },
    Checkpoint {
        generation: u64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        stage: Option<usize>,
        file: String,
    },
    BudgetExhausted {
        generation: u64,
        env_steps: u64,
    },
    Aborted {
        generation: u64,
        error: String,
    },
    RunFinished {
        generations: u64,
        env_steps: u64,
        eval_env_steps: u64,
    },
}

pub struct EventLog {
    inner: BufWriter<File>,
}

impl EventLog {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            inner: BufWriter::new(File::create(path)?),
        })
    }

    pub fn emit(&mut self, event: &Event) -> Result<()> {
        serde_json::to_writer(&mut self.inner, event)?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Folds the RL phase into a row.
pub(crate) fn apply_rl(row: &mut MetricsRow, rl: &RlStats) {
    row.critic_loss1 = rl.critic_loss1;
    row.critic_loss2 = rl.critic_loss2;
    row.actor_objective = rl.actor_objective;
    row.entropy = rl.entropy;
    row.rl_steps = rl.steps;
}
