//! `chs-dynbc` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 verification failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "chs-dynbc",
    version,
    about = "Viscous Cahn–Hilliard with dynamic boundary conditions: simulation and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write the time series and snapshots.
    Run(Common),
    /// Run the acceptance checks and print one line per criterion.
    Verify(VerifyArgs),
    /// Compare runs driven by the configured control and perturbed copies of it.
    Stability(Common),
    /// Refine one parameter and tabulate successive differences.
    Convergence(Common),
    /// One independent run per value of a parameter grid.
    Sweep(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; CHS_DYNBC_JOBS takes precedence.
    #[arg(long, value_name = "K")]
    pub jobs: Option<usize>,
    /// Also write legacy VTK snapshots.
    #[arg(long)]
    pub vtk: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Comma-separated criterion names (default: all).
    #[arg(long, value_name = "NAMES", value_delimiter = ',')]
    pub only: Vec<String>,
    /// Also write verify.csv here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Test hook: make the named criterion fail.
    #[arg(long, hide = true, value_name = "NAME")]
    pub sabotage: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Stability(a) => commands::stability(&a),
        Command::Convergence(a) => commands::convergence(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
