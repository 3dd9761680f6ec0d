use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multizone::cli;

/// Multizone sound rendering toolkit: prefilter design, modal analysis,
/// and free-field simulation experiments.
#[derive(Parser)]
#[command(name = "multizone", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design prefilters for every configured method and write
    /// per-frequency metrics and broadband summaries.
    ScenarioRun(CommonArgs),
    /// Compute modal spectra of the contour quantities and locate the
    /// observability minima.
    ModalScan(CommonArgs),
    /// Sweep sensor-noise SNRs and tabulate broadband level difference and
    /// bright-zone MSE per method.
    NoiseSweep(CommonArgs),
    /// Render steady-state and pulse wavefield frames.
    FieldSnapshot(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `[output] dir`, then
    /// `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's evaluation seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match &args.command {
        Command::ScenarioRun(a) => cli::cmd_scenario_run(&a.config, a.out.as_deref(), a.seed),
        Command::ModalScan(a) => cli::cmd_modal_scan(&a.config, a.out.as_deref(), a.seed),
        Command::NoiseSweep(a) => cli::cmd_noise_sweep(&a.config, a.out.as_deref(), a.seed),
        Command::FieldSnapshot(a) => cli::cmd_field_snapshot(&a.config, a.out.as_deref(), a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
