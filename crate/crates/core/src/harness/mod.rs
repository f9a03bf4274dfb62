//! End-to-end training: configuration, the generation loop, evaluation,
//! checkpoints, metrics and traces.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod trainer;
pub mod traces;

pub use checkpoint::{Checkpoint, CheckpointHeader, ModelKind};
pub use config::{Mode, RlSteps, TrainerConfig};
pub use eval::{evaluate_policy, evaluate_returns, ReturnStats};
pub use metrics::{read_events, read_metrics, Event, MetricsRow};
pub use trainer::{train, RunSummary};
pub use traces::{export_run_traces, export_traces, replay_trace, Trace};
