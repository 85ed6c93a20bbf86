use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "atph",
    version,
    about = "Atom-photon entanglement: fringe scans, tomography, calibration and Bell-test planning"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for all random draws.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use expected counts instead of random draws.
    #[arg(long, global = true)]
    pub exact: bool,
    /// Output file prefix.
    #[arg(long, global = true, default_value = "atph")]
    pub out: PathBuf,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for seed sweeps and bootstrap replicas.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Configuration override `key=value`; applied after --config, later wins.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate analyzer-angle fringe scans and fit their visibilities.
    Scan,
    /// Reconstruct the joint state from counts (given or simulated).
    Tomo,
    /// Find noise parameters reproducing target visibilities and fidelity.
    Calibrate,
    /// Feasibility numbers for an event-ready Bell test.
    Plan,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan => commands::scan(&cli.global),
        Command::Tomo => commands::tomo(&cli.global),
        Command::Calibrate => commands::calibrate(&cli.global),
        Command::Plan => commands::plan(&cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
