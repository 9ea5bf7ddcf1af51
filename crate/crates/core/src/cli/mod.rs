//! The `mflqr` batch front end.
//!
//! ```text
//! mflqr solve|simulate|sweep|verify <config-path> [--out DIR] [--seed N] [--runs N] [--threads N]
//! ```
//!
//! Exit codes: 0 success, 1 verification failure, 2 I/O or config error.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_simulate, cmd_solve, cmd_sweep, cmd_verify};
pub use config::{parse_config, parse_config_str, ExperimentConfig, InitialState};
pub use output::{ResultTable, RunMetadata};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mflqr",
    version,
    about = "Risk-aware LQR for mean-field coupled subsystems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write gain and value-function schedules for every λ.
    Solve(RunArgs),
    /// Write per-epoch energy statistics for every λ.
    Simulate(RunArgs),
    /// Write time-averaged energy statistics, one row per λ.
    Sweep(RunArgs),
    /// Run the numerical self-checks on a small instance.
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Output directory, overriding `experiment.output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding `experiment.base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo runs, overriding `experiment.n_runs`.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Simulate(a) | Command::Sweep(a) | Command::Verify(a) => a,
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(runs) = args.runs {
        if runs == 0 {
            return Err(Error::Invalid("--runs must be at least 1".into()));
        }
        config.n_runs = runs;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let args = cli.command.args();
    let pool = match args.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return EXIT_ERROR;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    let config = load(command.args())?;
    if let Command::Verify(_) = command {
        let checks = cmd_verify(&config)?;
        for check in &checks {
            println!("{check}");
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        println!("{} checks, {failed} failed", checks.len());
        return Ok(if failed == 0 {
            EXIT_OK
        } else {
            EXIT_VERIFY_FAILED
        });
    }
    std::fs::create_dir_all(&config.output_dir)?;
    let out = &config.output_dir;
    let written = match command {
        Command::Solve(_) => cmd_solve(&config, out)?,
        Command::Simulate(_) => cmd_simulate(&config, out)?,
        Command::Sweep(_) => cmd_sweep(&config, out)?,
        Command::Verify(_) => unreachable!(),
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}
