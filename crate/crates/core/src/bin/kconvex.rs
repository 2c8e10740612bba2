use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kconvex::cli::{self, Command, Invocation};

#[derive(Parser)]
#[command(name = "kconvex", version, about = "Boundary exponents, barriers and a wide-stencil Monge-Ampere solver", after_help = cli::EXIT_CODE_HELP)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Boundary exponent mu, flat exponent and the b_i coefficients.
    Exponent(Common),
    /// Certify k-strict convexity at a boundary point.
    Certify(Common),
    /// Find and certify a barrier subsolution.
    Barrier(Common),
    /// Solve the Dirichlet problem on a planar domain.
    Solve(Common),
    /// Solve, then fit |u| ~ C d^mu along the inward normal.
    Rate(Common),
    /// Check the closed-form solutions (residuals and boundary rates).
    VerifyExamples(Common),
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::exit::CONFIG } else { cli::exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, c) = match args.command {
        Sub::Exponent(c) => (Command::Exponent, c),
        Sub::Certify(c) => (Command::Certify, c),
        Sub::Barrier(c) => (Command::Barrier, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Rate(c) => (Command::Rate, c),
        Sub::VerifyExamples(c) => (Command::VerifyExamples, c),
    };
    let inv = Invocation { command, config: c.config, out: c.out, seed: c.seed, threads: c.threads };
    ExitCode::from(cli::run(&inv) as u8)
}
