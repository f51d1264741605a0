//! `granular` — command-line front end for the spectral granular-gas
//! solver. All physics lives in the library; this binary only parses
//! arguments, applies the `GRANULAR_THREADS` cap, and dispatches.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use granular::cli_io;

#[derive(Parser)]
#[command(
    name = "granular",
    about = "Fourier spectral solver for the inelastic Boltzmann equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the fast method's collision tables and cache them on disk.
    Precompute(CommonArgs),
    /// Integrate the configured experiment, streaming series.csv and
    /// snapshots to the output directory.
    Run(CommonArgs),
    /// Evaluate the collision operator with the direct and fast methods
    /// and report their discrepancy.
    Compare(CommonArgs),
    /// Analyze previously written outputs (tail fit, cooling slope,
    /// entropy).
    Diagnose(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output.dir`, then to
    /// the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> granular::Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    let (args, run): (
        &CommonArgs,
        fn(&cli_io::RunConfig, &std::path::Path, &mut std::io::Stdout) -> granular::Result<()>,
    ) = match &cli.command {
        Command::Precompute(args) => (args, cli_io::command_precompute),
        Command::Run(args) => (args, cli_io::command_run),
        Command::Compare(args) => (args, |config, _out, sink| {
            cli_io::command_compare(config, sink)
        }),
        Command::Diagnose(args) => (args, cli_io::command_diagnose),
    };
    let config = cli_io::load_config(&args.config)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    run(&config, &out_dir, &mut std::io::stdout())
}

/// Applies the `GRANULAR_THREADS` worker-count cap before any parallel
/// region spins up. Results do not depend on the count — only speed does.
fn configure_threads() -> granular::Result<()> {
    let Ok(raw) = std::env::var("GRANULAR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| granular::GranularError::ConstraintError {
        message: format!("GRANULAR_THREADS: `{raw}` is not a positive integer"),
    })?;
    if threads == 0 {
        return Err(granular::GranularError::ConstraintError {
            message: "GRANULAR_THREADS: must be at least 1".into(),
        });
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|err| granular::GranularError::ConstraintError {
            message: format!("GRANULAR_THREADS: {err}"),
        })
}
