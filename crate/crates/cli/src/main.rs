mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Delay channel analysis, simulation and short-pulse filter experiments.
///
/// Exit status: 0 when everything checked holds, 1 on a domain failure
/// (violated constraint, failed fit, unexpected classification), 2 on usage
/// or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "etaidm", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed from which every random choice is derived.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Directory that relative output paths are placed in.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON file overriding numerical tolerances.
    #[arg(long, global = true)]
    pub tolerance_overrides: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the adversary constraints of a channel and print the fixed point.
    Check(commands::CheckArgs),
    /// Simulate a netlist under a stimulus and write the output trace.
    Simulate(commands::SimulateArgs),
    /// Sweep input pulse lengths through the short-pulse filter circuit.
    SpfSweep(commands::SweepArgs),
    /// Fit a SumExp channel to measured delay samples.
    Fit(commands::FitArgs),
    /// Score how well a corridor covers measured delay samples.
    Coverage(commands::CoverageArgs),
    /// Characterize the synthetic analog gate.
    Characterize(commands::CharacterizeArgs),
    /// Compare corridor coverage of several corners under two bound sets.
    CompareCorners(commands::CornersArgs),
    /// Plot measured delays against the old and new corridors.
    Plot(commands::PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
