mod commands;
mod config;
mod error;
mod plotdata;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

/// Environment variable giving the default worker count.
const THREADS_ENV: &str = "TUGWEDGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tugwedge", version, about = "Explicit p-harmonic wedge solutions and tug-of-war exit times")]
struct Cli {
    /// Worker threads for simulations [default: $TUGWEDGE_THREADS, else all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical half and full apertures for p by three independent routes.
    CriticalAngle {
        #[arg(long)]
        p: f64,
        /// Tolerance for the quadrature route.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Calibrate a profile to a full aperture and write it as CSV.
    Solve {
        #[arg(long)]
        p: f64,
        /// Full aperture in radians.
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = tugwedge::profile::DEFAULT_NODES)]
        nodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the p-Laplacian on a stored profile's wedge.
    Verify {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Field::U)]
        field: Field,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep described by a TOML file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Sweep CSV path; overrides `[output] csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reshape a CSV produced by another subcommand into labelled x/y series.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: String,
        /// `.csv` gives long-format CSV, anything else JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the half-aperture θ_a over a log-spaced range of a.
    ThetaScan {
        #[arg(long, required = true, num_args = 1..)]
        p: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        a_min: f64,
        #[arg(long, default_value_t = 100.0)]
        a_max: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Field {
    /// The stored solution; the residual is `Δₚu + 1`.
    U,
    /// A linear field, which is p-harmonic.
    Linear,
    /// A random quadratic form, compared with its closed-form p-Laplacian.
    Quadratic,
}

fn init_threads(flag: Option<usize>) -> CliResult<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::CriticalAngle { p, tol, json } => commands::critical_angle(p, tol, json),
        Command::Solve { p, eta, nodes, out } => commands::solve(p, eta, nodes, &out),
        Command::Verify { profile, points, seed, field, out } => {
            commands::verify(&profile, points, seed, field, out.as_deref())
        }
        Command::Simulate { config, out } => commands::simulate(&config, out),
        Command::Plotdata { input, kind, out } => plotdata::run(&input, &kind, &out),
        Command::ThetaScan { p, a_min, a_max, n, out } => commands::theta_scan(&p, a_min, a_max, n, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tugwedge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
