//! Command-line front end for the beamkit experiment runner.

use beamkit::config::{ExperimentConfig, RawConfig, Scenario};
use beamkit::experiment::{run, RunOptions};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "beamkit",
    version,
    about = "Wideband joint radar-communications beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its curves and manifest.
    Run {
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured scenario.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
        /// Override the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (default: $BEAMKIT_OUT, then ./results).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a configuration and report every problem found.
    Validate {
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Scenario::ALL.iter().map(|sc| sc.name()).collect();
        format!("unknown scenario `{s}` (expected one of {})", names.join(", "))
    })
}

fn load(config: &Option<PathBuf>) -> Result<(ExperimentConfig, Vec<String>), String> {
    let (raw, mut problems) = match config {
        None => (RawConfig::default(), Vec::new()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            RawConfig::parse_lenient(&text)
        }
    };
    let (cfg, more) = ExperimentConfig::resolve(&raw);
    problems.extend(more);
    Ok((cfg, problems))
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("BEAMKIT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let (cfg, mut problems) = match load(&config) {
                Ok(v) => v,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::FAILURE;
                }
            };
            problems.extend(cfg.validate());
            if problems.is_empty() {
                println!("ok: configuration is valid ({})", cfg.scenario);
                ExitCode::SUCCESS
            } else {
                for p in &problems {
                    println!("invalid: {p}");
                }
                ExitCode::FAILURE
            }
        }
        Command::Run { config, scenario, seed, trials, jobs, out_dir: dir } => {
            let (mut cfg, problems) = match load(&config) {
                Ok(v) => v,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::FAILURE;
                }
            };
            if !problems.is_empty() {
                for p in &problems {
                    eprintln!("error: {p}");
                }
                return ExitCode::FAILURE;
            }
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let opts = RunOptions { out_dir: out_dir(dir), jobs };
            match run(&cfg, &opts) {
                Ok(summary) => {
                    println!("scenario: {}", summary.scenario);
                    for path in &summary.curves {
                        println!("wrote {}", path.display());
                    }
                    println!("wrote {}", summary.manifest.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
