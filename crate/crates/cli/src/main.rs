//! Command-line front end: simulation, absorption ensembles, exact solves,
//! symbolic verification and transport reports, all driven by JSON chain
//! specs with CSV/JSON outputs.

mod commands;
mod manifest;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "enex",
    version,
    about = "Boundary-driven energy-exchange chains: simulators, exact dual solvers, symbolic verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run stochastic trajectories and write observation CSVs.
    Simulate(commands::simulate::SimulateArgs),
    /// Run absorbing-walker ensembles and tally exits.
    Sip(commands::sip::SipArgs),
    /// Exact steady-state computations from the dual walker chain.
    Solve(commands::solve::SolveArgs),
    /// Symbolic identity verification; exits 2 on any nonzero residual.
    Verify(commands::verify::VerifyArgs),
    /// Summarize recorded trajectories into transport estimates.
    Report(commands::report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Sip(args) => commands::sip::run(args),
        Command::Solve(args) => commands::solve::run(args),
        Command::Verify(args) => commands::verify::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
