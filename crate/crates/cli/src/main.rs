//! `pdg`: design analysis, trajectory planning, tilt sweeps, simulation and
//! Monte Carlo campaigns for lunar powered descent.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 guidance
//! not converged, 4 guidance infeasible, 5 simulation fault.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use pdg_core::campaign::FlightMode;

use config::{load_campaign, CampaignArgs, ProblemArgs};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pdg",
    version,
    about = "Lunar powered-descent guidance toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tip-over tables, delta-v budget, critical tilt and mass properties.
    Analyze {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Solve one minimum-fuel descent; writes trajectory.csv and plan_report.json.
    Plan {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(short, long, default_value = ".", value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Solve across tilt limits; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Tilt limits, degrees.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
        thetas: Vec<f64>,
        #[arg(short, long, default_value = ".", value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Fly one dispersed descent; writes flight.csv and sim_metrics.json.
    #[command(group(ArgGroup::new("mode").args(["open_loop", "closed_loop"])))]
    Sim {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Fly the nominal plan without replanning.
        #[arg(long)]
        open_loop: bool,
        /// Replan from the truth state on the configured cadence (default).
        #[arg(long)]
        closed_loop: bool,
        /// Dispersion seed, used as is.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = ".", value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Monte Carlo campaign; writes records.csv and summary.json.
    Mc {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Number of dispersed runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed; run i uses a hash of (seed, i).
        #[arg(long)]
        seed: Option<u64>,
        /// Fly open and closed loop on every draw.
        #[arg(long)]
        paired: bool,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(short, long, default_value = ".", value_name = "DIR")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Analyze { problem, json } => commands::analyze(&problem.load()?, json),
        Command::Plan { problem, out_dir } => commands::plan(&problem.load()?, &out_dir),
        Command::Sweep {
            problem,
            thetas,
            out_dir,
        } => commands::sweep(&problem.load()?, &thetas, &out_dir),
        Command::Sim {
            problem,
            campaign,
            open_loop,
            closed_loop: _,
            seed,
            out_dir,
        } => {
            let cfg = load_campaign(&problem, &campaign)?;
            let mode = if open_loop {
                FlightMode::OpenLoop
            } else {
                FlightMode::ClosedLoop
            };
            commands::sim(&cfg, mode, seed, &out_dir)
        }
        Command::Mc {
            problem,
            campaign,
            runs,
            seed,
            paired,
            threads,
            out_dir,
        } => {
            let mut cfg = load_campaign(&problem, &campaign)?;
            if let Some(n) = runs {
                cfg.runs = n;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.paired |= paired;
            if threads == Some(0) {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            commands::mc(&cfg, threads, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pdg: {e}");
            ExitCode::from(e.code())
        }
    }
}
