use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rmbandit::bandit::load_bandit;
use rmbandit::harness::{build_report, export_state, render_text, run_experiment, write_csv, ExperimentConfig, ExperimentSummary};

#[derive(Parser)]
#[command(name = "rmbandit", version, about = "Bandit-driven reward scorer selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory (default: `run.out`, else `runs/<strategy>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished experiment directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Copy a run's bandit state to a standalone file.
    ExportState {
        run_dir: PathBuf,
        file: PathBuf,
        /// Seed whose state to export (default: the lowest).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a config with its bandit cold-started from a saved state. The
    /// loaded selector stays fixed unless `--keep-learning` is given.
    Resume {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bandit: PathBuf,
        #[arg(long)]
        keep_learning: bool,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = seed_override {
        config.run.seeds = vec![seed];
    }
    Ok(config)
}

fn out_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(config.run.strategy.as_str()))
}

fn print_summary(summary: &ExperimentSummary, out: &Path) {
    for run in &summary.runs {
        println!(
            "{}: regret {:.3}, gold quality {:.4}, scorer calls {}",
            run.run_id, run.final_regret, run.mean_gold_quality, run.scorer_calls
        );
    }
    println!(
        "mean over {} runs: regret {:.3}, gold quality {:.4}; outputs in {}",
        summary.runs.len(),
        summary.mean_final_regret,
        summary.mean_gold_quality,
        out.display()
    );
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            out,
        } => {
            let config = load_config(&config, seed_override)?;
            let out = out_dir(&config, out);
            let summary = run_experiment(&config, &out, None)?;
            print_summary(&summary, &out);
        }
        Command::Resume {
            config,
            bandit,
            keep_learning,
            seed_override,
            out,
        } => {
            let mut config = load_config(&config, seed_override)?;
            config.training.freeze_bandit = !keep_learning;
            let state = load_bandit(&bandit)?;
            let out = out_dir(&config, out);
            let summary = run_experiment(&config, &out, Some(&state))?;
            print_summary(&summary, &out);
        }
        Command::Report { dirs, csv } => {
            let rows = build_report(&dirs)?;
            print!("{}", render_text(&rows));
            if let Some(path) = csv {
                write_csv(&rows, &path).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::ExportState { run_dir, file, seed } => {
            let source = export_state(&run_dir, &file, seed)?;
            println!("exported {} to {}", source.display(), file.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
