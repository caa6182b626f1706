use std::io;

use clap::{Parser, Subcommand};
use sylvobs::{
    cmd_check, cmd_observe, cmd_simulate, cmd_solve, CheckArgs, SimulateArgs, SolveArgs,
    EXIT_INPUT, EXIT_OK,
};

/// Reduced-order observer design through the constrained Sylvester equation
/// `T A - F T = G C`.
#[derive(Debug, Parser)]
#[command(name = "sylvobs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report per-eigenvalue stability and observability of (A, C).
    Check(CheckArgs),
    /// Solve for (T, F, G) and verify the solution.
    Solve(SolveArgs),
    /// Synthesize the reduced-order observer (F, G, P, T, W).
    Observe(SolveArgs),
    /// Simulate plant and observer and report error metrics.
    Simulate(SimulateArgs),
}

fn main() {
    // Usage errors share the input-error exit code; clap's default of 2 would
    // read as "undetectable".
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        let _ = e.print();
        std::process::exit(code);
    });
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match &cli.command {
        Command::Check(args) => cmd_check(args, &mut out, &mut err),
        Command::Solve(args) => cmd_solve(args, &mut out, &mut err),
        Command::Observe(args) => cmd_observe(args, &mut out, &mut err),
        Command::Simulate(args) => cmd_simulate(args, &mut out, &mut err),
    };
    std::process::exit(code);
}
