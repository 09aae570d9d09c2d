//! `weblin`: linearizability checks, invariant reports and numerical
//! linearization for planar webs given by web functions.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "weblin", version, about = "Linearizability of planar d-webs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide linearizability: prints YES, NO or INCONCLUSIVE.
    Check(RunArgs),
    /// Print every invariant with its verdict, DAG size and evidence.
    Invariants(RunArgs),
    /// Build flat coordinates and report how straight each foliation becomes.
    Linearize(RunArgs),
    /// Run the built-in corpus and compare against the known verdicts.
    Selftest(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Third web function f (the first two foliations are x and y).
    #[arg(long)]
    pub f: Option<String>,
    /// Further web functions g4, g5, ...; repeat for each.
    #[arg(long = "g")]
    pub g: Vec<String>,
    /// Use a corpus example (1-9) for the web functions and domain.
    #[arg(long, conflicts_with_all = ["f", "g"])]
    pub example: Option<u8>,
    /// Sampling and grid rectangle "xlo,xhi,ylo,yhi".
    #[arg(long)]
    pub domain: Option<String>,
    /// Seed for the sample points and parameter draws.
    #[arg(long, default_value_t = weblin::calculus::DEFAULT_SEED)]
    pub seed: u64,
    /// Sample points per parameter draw.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Float precision in bits for non-rational invariants.
    #[arg(long, default_value_t = weblin::expr::DEFAULT_PRECISION)]
    pub precision: u32,
    /// Fix a free parameter, e.g. --param n=2.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Grid nodes per side for linearize.
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
    /// Base point "x,y" for linearize; defaults to the domain centre.
    #[arg(long)]
    pub base: Option<String>,
    /// Initial values "l1,l2" of the Frobenius system.
    #[arg(long, default_value = "0,0")]
    pub lambda0: String,
    /// Print the full report as JSON on stdout.
    #[arg(long)]
    pub json: bool,
    /// Write the traced leaves as SVG.
    #[arg(long)]
    pub svg: Option<std::path::PathBuf>,
    /// Linearize even when the web does not test linearizable.
    #[arg(long)]
    pub force: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Check(a) => commands::check(&a, false),
        Command::Invariants(a) => commands::check(&a, true),
        Command::Linearize(a) => commands::linearize(&a),
        Command::Selftest(a) => commands::selftest(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
