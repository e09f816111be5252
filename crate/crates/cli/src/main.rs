//! Experiment runner for the anisoheat library.
//!
//! Subcommands: `run` executes a named experiment from a TOML config (plus
//! flag overrides) and writes CSV/JSON artifacts and a run manifest;
//! `list` prints the experiment catalog; `validate` checks a config
//! without running. Thread count follows `RAYON_NUM_THREADS`.

mod config;
mod experiments;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{catalog_entry, validate, ExperimentConfig, CATALOG};

#[derive(Parser)]
#[command(name = "anisoheat", version, about = "anisotropic heat-calculus experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name (when no config file is given, or to override it).
    #[arg(long)]
    experiment: Option<String>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized experiments (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter override KEY=VAL (repeatable).
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute an experiment and write artifacts + manifest.
    Run(ConfigArgs),
    /// Print the experiment catalog.
    List,
    /// Validate a config without running it.
    Validate(ConfigArgs),
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, config::ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let name = args.experiment.as_deref().ok_or_else(|| {
                config::ConfigError::Schema(
                    "either --config or --experiment is required".into(),
                )
            })?;
            ExperimentConfig::empty(name)
        }
    };
    if let Some(name) = &args.experiment {
        cfg.experiment = name.clone();
    }
    for kv in &args.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            println!("{} experiments:", CATALOG.len());
            for e in CATALOG {
                println!(
                    "  {:<16} {}{}\n  {:<16} claim: {}",
                    e.name,
                    e.description,
                    if e.randomized { " (seeded)" } else { "" },
                    "",
                    e.claim
                );
            }
            ExitCode::from(0)
        }
        Cmd::Validate(args) => match resolve(&args).and_then(|cfg| validate(&cfg)) {
            Ok(()) => {
                println!("config is valid");
                ExitCode::from(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Run(args) => {
            let cfg = match resolve(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = validate(&cfg) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            let out_dir = cfg
                .out_dir
                .clone()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.experiment));
            match runner::run(&cfg, &out_dir) {
                Ok(manifest) => {
                    let entry = catalog_entry(&cfg.experiment).expect("validated");
                    println!(
                        "{}: {} ({:.1}s, {} artifacts) -> {}",
                        entry.name,
                        if manifest.pass { "PASS" } else { "FAIL" },
                        manifest.wall_clock_secs,
                        manifest.artifacts.len(),
                        out_dir.display()
                    );
                    for a in &manifest.assertions {
                        println!(
                            "  [{}] {}: {}",
                            if a.pass { "ok" } else { "FAIL" },
                            a.name,
                            a.detail
                        );
                    }
                    if manifest.pass {
                        ExitCode::from(0)
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
