//! Command-line interface: generate synthetic instances, solve, check
//! identifiability assumptions, sweep benchmark axes, and re-evaluate saved
//! artifacts.
//!
//! Exit codes: 0 on success, 1 on usage or data errors, 2 when the solver
//! exhausts its budget without converging.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;

use commands::{bench, check, eval_cmd, solve, synth_cmd, CliError, Outcome};

#[derive(Parser)]
#[command(
    name = "irpca",
    about = "Inductive robust PCA via iterative hard thresholding",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and write matrices plus a manifest.
    Synth(synth_cmd::SynthArgs),
    /// Run the solver on an observed matrix (inductive or transductive).
    Solve(solve::SolveArgs),
    /// Check the identifiability assumptions of a generated instance.
    Check(check::CheckArgs),
    /// Sweep one problem axis and emit per-point timing/error statistics.
    Bench(bench::BenchArgs),
    /// Recompute recovery metrics from saved artifacts.
    Eval(eval_cmd::EvalArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => synth_cmd::run(args),
        Command::Solve(args) => solve::run(args),
        Command::Check(args) => check::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Eval(args) => eval_cmd::run(args),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::BudgetExhausted) => {
            eprintln!("irpca: iteration budget exhausted without convergence");
            ExitCode::from(2)
        }
        Err(CliError(msg)) => {
            eprintln!("irpca: {msg}");
            ExitCode::from(1)
        }
    }
}
