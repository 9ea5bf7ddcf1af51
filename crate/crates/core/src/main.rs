use std::process::ExitCode;

use clap::Parser;
use mflqr_core::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(&cli) as u8)
}
