//! `flexsplit`: batch experiments for flexible functional split planning.
//!
//! Exit codes: 0 success (an infeasible CFSMA result included), 1 I/O failure,
//! 2 bad configuration or arguments, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flexsplit_core::Error;

use config::{ConfigError, ExperimentConfig};
use output::{Manifest, Writer};

#[derive(Parser)]
#[command(
    name = "flexsplit",
    version,
    about = "Flexible functional split experiments"
)]
struct Cli {
    /// Experiment config (JSON). The built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `experiment.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `experiment.monte_carlo.trials`.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Also write long-format `<table>.plot.csv` files.
    #[arg(long, global = true)]
    plot_data: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Mode access ratio vs PLD threshold, closed form and simulated.
    MarSweep,
    /// Coverage and ergodic rate vs SINR threshold and PLD threshold.
    CoverageSweep,
    /// Optimized outage vs user density.
    DensitySweep,
    /// Optimized outage vs CM control overhead.
    OverheadSweep,
    /// Optimized outage vs DU efficiency.
    EtaSweep,
    /// Single CFSMA solve on the configured system.
    Cfsma,
    /// Queue simulation checked against the analytic sojourn times.
    QueueSim,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::MarSweep => "mar-sweep",
            Command::CoverageSweep => "coverage-sweep",
            Command::DensitySweep => "density-sweep",
            Command::OverheadSweep => "overhead-sweep",
            Command::EtaSweep => "eta-sweep",
            Command::Cfsma => "cfsma",
            Command::QueueSim => "queue-sim",
        }
    }

    fn run(self, cfg: &ExperimentConfig) -> flexsplit_core::Result<commands::Run> {
        match self {
            Command::MarSweep => commands::mar_sweep(cfg),
            Command::CoverageSweep => commands::coverage_sweep(cfg),
            Command::DensitySweep => commands::density_sweep(cfg),
            Command::OverheadSweep => commands::overhead_sweep(cfg),
            Command::EtaSweep => commands::eta_sweep(cfg),
            Command::Cfsma => commands::cfsma_point(cfg),
            Command::QueueSim => commands::queue_sim(cfg),
        }
    }
}

enum Failure {
    Config(ConfigError),
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Config(e) => {
                eprintln!("config error at {e}");
                ExitCode::from(2)
            }
            Failure::Core(e) => {
                eprintln!("error: {e}");
                match e {
                    Error::InvalidModel(_)
                    | Error::InvalidArgument(_)
                    | Error::InvalidThreshold(_)
                    | Error::InfiniteThreshold => ExitCode::from(2),
                    _ => ExitCode::from(3),
                }
            }
            Failure::Io(path, e) => {
                eprintln!("i/o error on {}: {e}", path.display());
                ExitCode::from(1)
            }
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::parse(config::DEFAULT_CONFIG)?,
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.experiment.monte_carlo.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli).map_err(Failure::Config)?;
    let run = cli.command.run(&cfg).map_err(Failure::Core)?;

    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(dir.clone(), e))?;
    let writer = Writer {
        dir: dir.clone(),
        config_hash: cfg.hash(),
        plot_data: cli.plot_data,
    };
    let io = |e| Failure::Io(dir.clone(), e);

    let mut tables = Vec::new();
    for t in &run.tables {
        tables.push(writer.write_table(t).map_err(io)?);
    }
    let name = cli.command.name();
    if let Some(result) = &run.result {
        writer
            .write_json(&format!("{name}.json"), result)
            .map_err(io)?;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name.to_owned(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        config_hash: writer.config_hash.clone(),
        schema_version: cfg.schema_version,
        seed: cfg.experiment.seed,
        trials: cfg.experiment.monte_carlo.trials,
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        tables,
        result: run.result,
    };
    writer.write_manifest(name, &manifest).map_err(io)?;

    println!("{name}: {}", run.summary);
    println!("wrote {} (config {})", dir.display(), writer.config_hash);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
