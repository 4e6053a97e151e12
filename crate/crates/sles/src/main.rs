//! Thin command-line front end over [`sles::pipeline`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sles::pipeline::{self, Overrides};

#[derive(Parser)]
#[command(
    name = "sles",
    version,
    about = "Stochastic large-eddy closure pipeline for a reaction-diffusion equation with memory"
)]
struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Ensemble-size override: benchmark members for run-benchmark,
    /// model realizations for run-sles.
    #[arg(long, global = true)]
    members: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the fine benchmark ensemble and its subgrid fields.
    RunBenchmark,
    /// Fit the drift and noise profile from the benchmark artifacts.
    Calibrate,
    /// Integrate the stochastic coarse model from the calibrated closure.
    RunSles,
    /// Compare the model ensemble to the benchmark and summarize errors.
    Compare {
        /// Also run and report the unparameterized coarse baseline.
        #[arg(long)]
        baseline: bool,
    },
    /// Dump one Weierstrass-Mandelbrot noise path as CSV.
    FbmSample,
}

fn run(cli: &Cli) -> sles::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        members: match cli.command {
            Command::RunBenchmark => cli.members,
            _ => None,
        },
        les_members: match cli.command {
            Command::RunSles => cli.members,
            _ => None,
        },
    };
    let cfg = pipeline::effective_config(cli.config.as_deref(), overrides)?;
    match &cli.command {
        Command::RunBenchmark => {
            pipeline::run_benchmark(&cfg, &cli.out)?;
            eprintln!(
                "benchmark ensemble of {} members written to {}",
                cfg.members,
                cli.out.display()
            );
        }
        Command::Calibrate => {
            pipeline::calibrate(&cfg, &cli.out)?;
            eprintln!("closure calibrated; artifacts in {}", cli.out.display());
        }
        Command::RunSles => {
            pipeline::run_sles(&cfg, &cli.out)?;
            eprintln!(
                "stochastic model ensemble of {} members written to {}",
                cfg.les_members,
                cli.out.display()
            );
        }
        Command::Compare { baseline } => {
            let summary = pipeline::compare(&cfg, &cli.out, *baseline)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::FbmSample => {
            pipeline::fbm_sample(&cfg, &cli.out)?;
            eprintln!("noise path written to {}", cli.out.display());
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
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
