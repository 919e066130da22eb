use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use digrad_harness::config::TrainConfig;
use digrad_harness::evaluate::evaluate_checkpoint;
use digrad_harness::matrix::run_matrix;
use digrad_harness::plots::emit_plots_from_dir;
use digrad_harness::trainer::{resolve_tree, run_training};
use digrad_core::env::{Env, RewardSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "digrad",
    about = "Train and evaluate differential policy gradient agents on branched-manipulator reachability tasks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm setting over every seed in the config.
    Train {
        /// Path to a key-value config file.
        config: PathBuf,
    },
    /// Run the full settings x seeds matrix and aggregate the curves.
    Matrix {
        /// Path to a key-value config file.
        config: PathBuf,
    },
    /// Evaluate a checkpointed actor with exploration noise omitted.
    Eval {
        /// Actor checkpoint (.ckpt).
        checkpoint: PathBuf,
        /// Builtin environment name or .tree file path.
        env: String,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        /// Seed for goal/state sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit per-panel plot data from a run directory's aggregates.
    Plots {
        /// Directory containing agg_<setting>.csv files.
        run_dir: PathBuf,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config } => {
            let cfg = TrainConfig::from_file(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let outdir = cfg.resolved_outdir();
            for &seed in &cfg.seeds {
                let outcome = run_training(&cfg, cfg.algorithm, seed, &outdir)?;
                println!(
                    "run {}_{}: {} episodes, {} env steps, {:.1}s -> {}",
                    outcome.setting,
                    outcome.seed,
                    outcome.log.records.len(),
                    outcome.stats.env_steps,
                    outcome.wall_clock_s,
                    outcome.train_csv.display()
                );
            }
            Ok(())
        }
        Command::Matrix { config } => {
            let cfg = TrainConfig::from_file(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let outdir = cfg.resolved_outdir();
            let report = run_matrix(&cfg, &outdir)?;
            for path in &report.agg_files {
                println!("aggregated -> {}", path.display());
            }
            if !report.failures.is_empty() {
                bail!(
                    "{} of {} runs failed; aggregation is partial",
                    report.failures.len(),
                    report.failures.len() + report.completed.len()
                );
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let tree = resolve_tree(&env)?;
            let reward = RewardSpec::for_tree(&tree);
            let template = Env::new(tree, reward, 200);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats = evaluate_checkpoint(&checkpoint, &template, episodes, &mut rng)?;
            println!("episodes: {}", stats.episodes);
            println!("all-task success rate: {:.3}", stats.success_rate);
            println!("task  mean_error  median_error  mean_score");
            for t in 0..stats.mean_final_error.len() {
                println!(
                    "{t:>4}  {:>10.5}  {:>12.5}  {:>10.4}",
                    stats.mean_final_error[t], stats.median_final_error[t], stats.mean_score[t]
                );
            }
            Ok(())
        }
        Command::Plots { run_dir } => {
            let files = emit_plots_from_dir(&run_dir)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}
