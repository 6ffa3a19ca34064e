use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stf_bench::fit_cli::{export_scenario, fit_observations, read_observations, write_estimates};
use stf_bench::{emit_report, load_config, run_campaign, Format, Result};
use stf_core::{QueryMode, StfConfig};

#[derive(Parser)]
#[command(name = "stf", version, about = "Trajectory fitting benchmarks and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit position observations with a sliding window.
    Fit {
        /// CSV with `time,sensor_id,dim0..` columns.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, value_enum, default_value_t = Mode::Online)]
        mode: Mode,
        #[arg(long, default_value_t = 5)]
        delay: usize,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scenario utilities.
    Scenarios {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write truth.csv and observations.csv for one run.
    Export {
        #[arg(long)]
        id: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Online,
    Delayed,
    Smoothed,
    Forecast,
}

impl From<Mode> for QueryMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Online => QueryMode::Online,
            Mode::Delayed => QueryMode::Delayed,
            Mode::Smoothed => QueryMode::Smoothed,
            Mode::Forecast => QueryMode::Forecast,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let report = run_campaign(&config)?;
            if let Some(path) = &config.output.csv {
                emit_report(&report, Format::Csv, path)?;
            }
            if let Some(path) = &config.output.json {
                emit_report(&report, Format::Json, path)?;
            }
            println!("{:<20} {:>14} {:>14}", "estimator", "mean_rmse", "mean_time_s");
            for row in &report.rows {
                println!("{:<20} {:>14.6} {:>14.6}", row.estimator, row.mean_rmse, row.mean_time_s);
            }
        }
        Command::Fit { obs, window, order, mode, delay, horizon, out } => {
            let observations = read_observations(&obs)?;
            let config = StfConfig {
                window_count: window,
                order,
                delay_steps: delay,
                horizon_steps: horizon,
                ..StfConfig::default()
            };
            config.validate()?;
            let estimates = fit_observations(&observations, &config, mode.into())?;
            write_estimates(&out, &estimates)?;
        }
        Command::Scenarios { command: ScenarioCommand::Export { id, seed, out_dir } } => {
            export_scenario(id, seed, &out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
