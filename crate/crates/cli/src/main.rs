use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use coerl::harness::{evaluate_policy, export_run_traces, train, Mode, TrainerConfig};
use coerl::EnvName;

const TRAIN_DEFAULTS: &str = "\
Config file: JSON object whose keys are TrainerConfig field names; omitted keys take defaults.

Defaults taken from the published method:
  pop_size 6, es_lr 1e-3, actor_lr 1e-3, critic_lr 1e-3, gamma 0.99,
  grouping_candidates [2, 3, 4]
Defaults chosen here (ours):
  sigma 1.0, alpha_s 0.2, batch_size 256, buffer_capacity 100000, horizon 200,
  hidden_dims [64, 64], polyak_tau 0.005, optimizer adam,
  rl_steps_per_generation match_env_steps, eval_every 5, eval_episodes 5,
  episodes_per_individual 1, standardize_fitness false";

#[derive(Parser)]
#[command(name = "coerl", version, about = "Cooperative coevolutionary reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training job and write metrics, events and checkpoints.
    #[command(after_help = TRAIN_DEFAULTS)]
    Train {
        #[arg(long)]
        config: PathBuf,
        /// coerl | coes | essac | es | sac
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel rollout workers (results do not depend on this).
        #[arg(long)]
        workers: Option<usize>,
        /// Bootstrap from the online critics instead of slow-moving copies.
        #[arg(long)]
        no_target_critics: bool,
        /// Use exactly this many groups every generation.
        #[arg(long)]
        fixed_m: Option<usize>,
        /// Run directory [default: runs/<env>-<mode>-seed<seed>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with deterministic actions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// point_mass | pendulum | lqr
        #[arg(long)]
        env: EnvName,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode length override (ours: 200)
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Write traces.jsonl for one generation of a run.
    ExportTraces {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        generation: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, mode, seed, workers, no_target_critics, fixed_m, out } => {
            let mut cfg = TrainerConfig::from_json_file(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if no_target_critics {
                cfg.use_target_critics = false;
            }
            if fixed_m.is_some() {
                cfg.fixed_m = fixed_m;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            let dir = cfg
                .out_dir
                .get_or_insert_with(|| format!("runs/{}-{}-seed{}", cfg.env, cfg.mode, cfg.seed).into())
                .clone();
            let summary = train(&cfg)?;
            let ret = summary
                .final_return()
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
            println!(
                "{} generations, {} env steps, final eval return {ret}; outputs in {}",
                summary.generations,
                summary.env_steps,
                dir.display()
            );
        }
        Command::Eval { checkpoint, env, episodes, seed, horizon } => {
            let stats = evaluate_policy(&checkpoint, env, episodes, seed, horizon)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
        Command::ExportTraces { run, generation } => {
            let traces = export_run_traces(&run, generation)?;
            println!(
                "wrote {} trace(s) to {}",
                traces.len(),
                run.join("traces.jsonl").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
