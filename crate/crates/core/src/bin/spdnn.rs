use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdnn::harness::commands::{
    load_config, run_lowerbound, run_probe, run_simulate, run_stability, run_sweep, run_train,
    Outcome,
};
use spdnn::Result;

#[derive(Parser)]
#[command(name = "spdnn", version, about = "Sparse-penalized DNN estimation for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (rate-sweep only).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a process and write the dataset as CSV.
    Simulate(Common),
    /// Fit one model; writes the checkpoint and the trace.
    Train(Common),
    /// Full sample-size sweep with slope fit.
    RateSweep(Common),
    /// Build and audit the lower-bound hypercube construction.
    VerifyLowerbound(Common),
    /// Estimate the curvature exponent of the excess risk.
    A4Probe(Common),
    /// Check GEXPAR stability.
    Stability(Common),
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate(c) => run_simulate(&load_config(&c.config)?, c.seed, &c.out),
        Command::Train(c) => run_train(&load_config(&c.config)?, c.seed, &c.out),
        Command::RateSweep(c) => run_sweep(&load_config(&c.config)?, c.seed, c.workers, &c.out),
        Command::VerifyLowerbound(c) => run_lowerbound(&load_config(&c.config)?, c.seed, &c.out),
        Command::A4Probe(c) => run_probe(&load_config(&c.config)?, c.seed, &c.out),
        Command::Stability(c) => run_stability(&load_config(&c.config)?, &c.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("summary is valid JSON")
            );
            if outcome.check_failed {
                eprintln!("acceptance check failed");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
