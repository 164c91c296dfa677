use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use phasefield::config::{Config, ExperimentKind};
use phasefield::runner::{execute, plan};
use phasefield::Error;

/// Pseudo-spectral IMEX solver and experiment harness for phase-field
/// equations.
#[derive(Debug, Parser)]
#[command(name = "phasefield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Advance one initial state, writing diagnostics and snapshots.
    Simulate(Common),
    /// Error against a reference for a list of step sizes.
    Converge(Common),
    /// Fixed-h sweep over the biharmonic coefficient.
    M2sweep(Common),
    /// Energy-stability map over (h, M1) or (h, alpha).
    Stabmap(Common),
    /// Parse the config and print the run plan without running.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config, then
    /// `out/<experiment>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    let (wanted, common) = match cli.command {
        Command::Simulate(c) => (Some(ExperimentKind::Simulate), c),
        Command::Converge(c) => (Some(ExperimentKind::Converge), c),
        Command::M2sweep(c) => (Some(ExperimentKind::M2sweep), c),
        Command::Stabmap(c) => (Some(ExperimentKind::Stabmap), c),
        Command::Validate(c) => (None, c),
    };
    let level = if common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(wanted, &common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}

fn run(wanted: Option<ExperimentKind>, common: &Common) -> Result<ExitCode, Error> {
    let mut cfg = Config::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = Some(threads);
    }
    cfg.validate()?;
    let Some(wanted) = wanted else {
        println!("{}", plan(&cfg)?);
        return Ok(ExitCode::SUCCESS);
    };
    if wanted != cfg.experiment {
        return Err(Error::ConfigError(format!(
            "subcommand `{}` does not match experiment = \"{}\" in {}",
            wanted.name(),
            cfg.experiment.name(),
            common.config.display()
        )));
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    log::info!("writing to {}", out.display());
    let outcome = execute(&cfg, &out)?;
    if !common.quiet {
        print!("{}", outcome.summary);
    }
    if let Some(f) = outcome.failure {
        eprintln!(
            "numerical failure at step {} (t = {}): {}; record written to {}",
            f.step,
            f.time,
            f.reason(),
            out.display()
        );
        return Ok(ExitCode::from(EXIT_NUMERICAL));
    }
    Ok(ExitCode::SUCCESS)
}
