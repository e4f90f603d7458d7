mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use crate::commands::{Ctx, GridKind, SweepKind};
use crate::config::{Format, ScenarioConfig};
use crate::exit::{CliResult, Config, Failure};
use crate::output::Sink;

const THREADS_VAR: &str = "CONTRACT_LAB_THREADS";

/// Screening-contract equilibria under concealed, revealed, garbled and
/// restricted information.
#[derive(Debug, Parser)]
#[command(name = "contract-lab", version)]
struct Cli {
    /// Scenario config (JSON; `.toml` files are read as TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Data file; defaults to the config's output.path, then stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides the config's output.format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Point count for sweeps and for ranged lambda axes.
    #[arg(long, global = true, value_name = "N")]
    grid_n: Option<usize>,
    /// Reserved. Nothing in contract-lab is random, so this is always rejected.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Concealed and revealed equilibria plus the quantity lemma.
    Solve,
    /// Agent utility along garbling or restriction paths.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Exponential-mean grids of revelation preference or the garbling slope at 1.
    Grid {
        #[arg(value_enum)]
        kind: GridKind,
    },
    /// Table of sufficient conditions and their preconditions.
    CheckConditions,
    /// Runs the built-in invariant battery.
    Verify,
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::config(anyhow!("{THREADS_VAR} must be a non-negative integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot start worker pool")
        .or_config()
}

fn sink(cli: &Cli, config: Option<&ScenarioConfig>) -> Sink {
    let from_config = config.map(|c| &c.output);
    Sink {
        format: cli.format.or(from_config.map(|o| o.format)).unwrap_or_default(),
        path: cli
            .out
            .clone()
            .or_else(|| from_config.and_then(|o| o.path.as_ref().map(PathBuf::from))),
    }
}

fn context(cli: &Cli) -> CliResult<Ctx> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("this command needs --config PATH")))?;
    let config = ScenarioConfig::load(path).or_config()?;
    let scenario = config.scenario().or_config()?;
    let scenario_id = path
        .file_stem()
        .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Ctx {
        sink: sink(cli, Some(&config)),
        config,
        scenario,
        scenario_id,
        grid_n: cli.grid_n,
    })
}

fn run(cli: &Cli) -> CliResult<u8> {
    if cli.seedless {
        return Err(Failure::config(anyhow!(
            "--seedless is reserved and rejected: contract-lab uses no randomness, so every run is already deterministic"
        )));
    }
    init_threads()?;
    match &cli.command {
        Command::Verify => commands::verify(&sink(cli, None)),
        Command::Solve => commands::solve(&context(cli)?),
        Command::Sweep { kind } => commands::sweep(&context(cli)?, *kind),
        Command::Grid { kind } => commands::grid(&context(cli)?, *kind),
        Command::CheckConditions => commands::check_conditions(&context(cli)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
