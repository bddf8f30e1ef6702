//! Command-line harness: single estimates, sweeps, mutual information,
//! constant tables, approximation checks and the nearest-neighbour baseline.

pub mod commands;
pub mod config;
pub mod error;
pub mod harness;
pub mod output;
pub mod records;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "rfkl", version, about = "Random-feature KL divergence and mutual information estimation")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate KL(P || Q) over independent trials and compare with the exact value.
    Estimate(commands::EstimateArgs),
    /// Repeat `estimate` over a list of m or T values.
    Sweep(commands::SweepArgs),
    /// Estimate the mutual information between two coordinate blocks of P.
    Mi(commands::MiArgs),
    /// Tabulate kappa, beta1 and beta2 over dimensions and smoothness values.
    Constants(commands::ConstantsArgs),
    /// Measure the sup-norm error of sampled networks against their target.
    VerifyApprox(commands::VerifyArgs),
    /// k-nearest-neighbour estimate on the same pair.
    Baseline(commands::BaselineArgs),
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Mi(a) => commands::mi(a),
        Command::Constants(a) => commands::constants(a),
        Command::VerifyApprox(a) => commands::verify_approx(a),
        Command::Baseline(a) => commands::baseline(a),
    }
}
