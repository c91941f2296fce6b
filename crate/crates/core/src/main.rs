use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fluxcoupler::cli::run::{execute, Command};

#[derive(Parser)]
#[command(
    version,
    about = "Four-local Ising couplings from a nonlinear flux coupler"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for the CSV file.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores; 1 runs serially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the randomized `check` harness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Coupler-ground and two-excitation levels versus the qubit frequency ratio.
    Spectrum,
    /// Couplings over the coupler screening parameter β_c.
    SweepBeta,
    /// Couplings over coupler flux offsets.
    SweepFlux,
    /// Fabrication-error susceptibilities at the J4 = −2·J2 point.
    Susceptibility,
    /// Spectral fit, analytic and numerical expansions side by side.
    CompareSwt,
    /// Coupler-ground versus coupler-excited gap over β_c.
    GapScan,
    /// Seeded randomized invariant checks.
    Check,
}

fn main() {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::SweepBeta => Command::SweepBeta,
        Cmd::SweepFlux => Command::SweepFlux,
        Cmd::Susceptibility => Command::Susceptibility,
        Cmd::CompareSwt => Command::CompareSwt,
        Cmd::GapScan => Command::GapScan,
        Cmd::Check => Command::Check,
    };
    let run = || execute(command, cli.config.as_deref(), &cli.out, cli.seed);
    let code = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be positive");
            2
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: thread pool: {e}");
                1
            }
        },
        None => run(),
    };
    std::process::exit(code);
}
