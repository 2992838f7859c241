use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grainkin::io::commands::{check_cmd, ladder_cmd, selfsim_cmd, simulate_cmd, stability_cmd, CommandOutcome};
use grainkin::io::RunConfig;
use grainkin::Error;

/// Kinetic grain-growth simulator and verification suite.
#[derive(Debug, Parser)]
#[command(name = "grainkin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
    /// Random seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and its diagnostics.
    Simulate(Common),
    /// Run the truncation ladder.
    Ladder(Common),
    /// Solve the self-similar moment relation.
    Selfsim(Common),
    /// Run the paired perturbation experiment.
    Stability(Common),
    /// Validate a config and optionally a snapshot file.
    Check {
        #[command(flatten)]
        common: Common,
        /// Snapshot CSV to check against the configured grid.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ADMISSIBILITY: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        Error::AdmissibilityLoss { .. }
        | Error::OverflowLeak { .. }
        | Error::DegenerateWeight { .. }
        | Error::NonContraction { .. }
        | Error::Numerical(_) => EXIT_ADMISSIBILITY,
        _ if matches!(err, Error::Aborted { .. }) => EXIT_ADMISSIBILITY,
        _ => EXIT_CONFIG,
    }
}

fn load(common: &Common) -> grainkin::Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn run(command: &Command) -> (grainkin::Result<CommandOutcome>, bool) {
    let (common, snapshot) = match command {
        Command::Simulate(c) | Command::Ladder(c) | Command::Selfsim(c) | Command::Stability(c) => (c, None),
        Command::Check { common, snapshot } => (common, snapshot.as_deref()),
    };
    let outcome = load(common).and_then(|(cfg, out)| dispatch(command, &cfg, &out, snapshot));
    (outcome, common.quiet)
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &Path, snapshot: Option<&Path>) -> grainkin::Result<CommandOutcome> {
    match command {
        Command::Simulate(_) => simulate_cmd(cfg, out),
        Command::Ladder(_) => ladder_cmd(cfg, out),
        Command::Selfsim(_) => selfsim_cmd(cfg, out),
        Command::Stability(_) => stability_cmd(cfg, out),
        Command::Check { .. } => check_cmd(cfg, snapshot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (outcome, quiet) = run(&cli.command);
    match outcome {
        Ok(o) => {
            if !quiet {
                println!("{}", o.summary);
                for f in &o.files {
                    println!("  wrote {}", f.display());
                }
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECKS_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
