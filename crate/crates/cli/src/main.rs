mod commands;
mod opts;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use opts::Options;

#[derive(Parser)]
#[command(name = "czforge", version, about = "Variational synthesis of CZ + rotation circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for decompositions of a target.
    #[command(subcommand)]
    Synth(Synth),
    /// Loss-landscape experiments.
    #[command(subcommand)]
    Bench(Bench),
    /// Simplify and rationalize stored decompositions.
    Refine(Options),
    /// Write stored decompositions as QASM.
    Export(Options),
}

#[derive(Subcommand)]
enum Synth {
    /// One batch of samples at fixed gate count and regularization.
    Static(Options),
    /// Rounds of static synthesis with tuned hyperparameters.
    Adaptive(Options),
}

#[derive(Subcommand)]
enum Bench {
    /// Success ratios over a range of gate counts, as CSV.
    Sr(Options),
    /// Final-loss histograms and critical-density fits, as JSON.
    Histogram(Options),
}

/// Nothing found.
pub const EXIT_NONE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(Synth::Static(o)) => commands::synth_static(o),
        Command::Synth(Synth::Adaptive(o)) => commands::synth_adaptive(o),
        Command::Bench(Bench::Sr(o)) => commands::bench_sr(o),
        Command::Bench(Bench::Histogram(o)) => commands::bench_histogram(o),
        Command::Refine(o) => commands::refine(o),
        Command::Export(o) => commands::export(o),
    };
    match result {
        Ok(found) if found => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_NONE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
