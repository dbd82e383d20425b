use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use pikan_cli::commands::{
    cmd_backtest, cmd_compare, cmd_ingest, cmd_synth, cmd_train, BacktestSource,
};
use pikan_cli::config::ExperimentConfig;
use pikan_cli::{split_overrides, CliError};
use pikan_core::synth::SynthConfig;

/// Physics-informed KAN reinforcement-learning agents for portfolio
/// allocation: data preparation, training, backtesting and reporting.
///
/// Any `--section.key=value` argument overrides the matching config entry.
#[derive(Parser)]
#[command(name = "pikan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market (GBM with optional momentum).
    Synth {
        /// Output directory for the per-asset CSV files.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        assets: usize,
        #[arg(long, default_value_t = 600)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// AR(1) coefficient injecting return autocorrelation.
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
        /// Comma-separated per-asset daily log-return drifts (cycled).
        #[arg(long, default_value = "0.0004", value_delimiter = ',')]
        drift: Vec<f64>,
        /// Comma-separated per-asset daily volatilities (cycled).
        #[arg(long, default_value = "0.01", value_delimiter = ',')]
        volatility: Vec<f64>,
        #[arg(long, default_value = "2015-01-01")]
        start_date: NaiveDate,
        #[arg(long, default_value_t = 100.0)]
        base_price: f64,
    },
    /// Validate raw CSVs, compute indicators, normalize and write the
    /// feature store.
    Ingest {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the configured agent on the training range.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a deterministic backtest over the test range.
    Backtest {
        #[command(flatten)]
        config: ConfigArgs,
        /// Baseline strategy name (ubah, crp, olmar, rmr, pamr).
        #[arg(long, conflicts_with = "checkpoint")]
        strategy: Option<String>,
        /// Agent checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory override (defaults to the config output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine per-run reports into one comparison table.
    Compare {
        /// Run directories, each holding a report.json.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write the table here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command, overrides: &[String]) -> Result<(), CliError> {
    match command {
        Command::Synth {
            out,
            assets,
            days,
            seed,
            momentum,
            drift,
            volatility,
            start_date,
            base_price,
        } => {
            let cfg = SynthConfig {
                assets,
                days,
                seed,
                drift,
                volatility,
                momentum,
                start_date,
                base_price,
            };
            let written = cmd_synth(&cfg, &out)?;
            println!("wrote {} synthetic asset files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Ingest { config } => {
            let cfg = ExperimentConfig::load(&config.config, overrides)?;
            let summary = cmd_ingest(&cfg)?;
            println!(
                "ingested {} assets; manifest at {}",
                summary.assets,
                summary.manifest.display()
            );
            Ok(())
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config.config, overrides)?;
            let summary = cmd_train(&cfg)?;
            println!(
                "trained {} steps ({} updates, {} episodes); log at {}",
                summary.steps,
                summary.updates,
                summary.episodes,
                summary.log_path.display()
            );
            if let Some(path) = summary.final_checkpoint {
                println!("final checkpoint at {}", path.display());
            }
            Ok(())
        }
        Command::Backtest {
            config,
            strategy,
            checkpoint,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config.config, overrides)?;
            let source = match (strategy, checkpoint) {
                (Some(name), None) => BacktestSource::Baseline(name),
                (None, Some(path)) => BacktestSource::Checkpoint(path),
                _ => {
                    return Err(CliError::Validation(
                        "specify exactly one of --strategy or --checkpoint".into(),
                    ))
                }
            };
            let summary = cmd_backtest(&cfg, &source, out.as_deref())?;
            println!(
                "{}: terminal wealth {:.2}; report at {}",
                summary.algorithm,
                summary.terminal_wealth,
                summary.report_json.display()
            );
            Ok(())
        }
        Command::Compare { runs, out } => {
            let table = cmd_compare(&runs, out.as_deref())?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (overrides, args) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version itself; argument errors are
            // validation failures
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
