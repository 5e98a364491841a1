use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symtrain_cli::commands;
use symtrain_cli::config::{Overrides, RunConfig};
use symtrain_cli::exit::exit_code;

/// Symmetry-regularized adversarial training lab: train small classifiers
/// under gradient attacks, regularize confusion-matrix symmetry, and measure
/// source-, target-, and subgroup-level fairness.
#[derive(Parser)]
#[command(name = "symtrain", version, about)]
struct Cli {
    /// Path to the run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the training seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: $SYMTRAIN_OUT/<command> or runs/<command>).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes checkpoint.json, epochs.csv, manifest.json.
    Train,
    /// Evaluate a checkpoint: fairness report, heatmaps, subgroup analyses.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Partition file(s): JSON mapping group name -> class indices.
        #[arg(long = "partition")]
        partitions: Vec<PathBuf>,
    },
    /// Multi-seed study with per-arm mean/std aggregation.
    Study {
        /// Comma-separated seed list; defaults to [study].seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Per-epoch wall-clock comparison of the regularizer arms.
    Bench,
    /// Check class-level vs subgroup-level symmetry on a confusion JSON.
    VerifyTheorem {
        #[arg(long)]
        confusion: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Materialize the configured dataset (CSV, attributes, partitions, mask).
    GenData,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Study { .. } => "study",
            Command::Bench => "bench",
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::GenData => "gen-data",
        }
    }
}

fn out_dir_for(cli: &Cli) -> PathBuf {
    if let Some(dir) = &cli.out_dir {
        return dir.clone();
    }
    let root = std::env::var_os("SYMTRAIN_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(cli.command.name())
}

fn load_config(cli: &Cli) -> symtrain_core::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&Overrides { seed: cli.seed });
    Ok(cfg)
}

fn run(cli: &Cli) -> symtrain_core::Result<()> {
    let out_dir = out_dir_for(cli);
    let quiet = cli.quiet;
    match &cli.command {
        Command::Train => {
            let cfg = load_config(cli)?;
            commands::cmd_train(&cfg, &out_dir, quiet)?;
        }
        Command::Evaluate {
            checkpoint,
            partitions,
        } => {
            let cfg = load_config(cli)?;
            commands::cmd_evaluate(&cfg, checkpoint, partitions, &out_dir, quiet)?;
        }
        Command::Study { seeds } => {
            let cfg = load_config(cli)?;
            commands::cmd_study(&cfg, seeds, &out_dir, quiet)?;
        }
        Command::Bench => {
            let cfg = load_config(cli)?;
            commands::cmd_bench(&cfg, &out_dir, quiet)?;
        }
        Command::VerifyTheorem {
            confusion,
            trials,
            tolerance,
        } => {
            let seed = cli.seed.unwrap_or(0);
            commands::cmd_verify_theorem(confusion, *trials, *tolerance, seed, &out_dir, quiet)?;
        }
        Command::GenData => {
            let cfg = load_config(cli)?;
            commands::cmd_gen_data(&cfg, &out_dir, quiet)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
