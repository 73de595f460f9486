//! `palpsim`: batch runner, report generator and interactive websocket service.

mod serve;

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use palpation_core::harness::{build_report, load_run_dir, run_batch, RunConfig};
use palpation_core::phantom::{load_phantom, DEFAULT_NECK};

#[derive(Parser)]
#[command(version, about = "Simulated remote palpation of a neck phantom")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded headless trials of one or more modes.
    Run {
        /// Mode(s) 1-4, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        mode: Vec<u8>,
        /// Phantom JSON file, or `default_neck` for the bundled phantom.
        #[arg(long, default_value = DEFAULT_NECK)]
        phantom: PathBuf,
        /// Trials per mode; defaults to the config's `harness.trials`.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML run config; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a run directory: writes `summary.csv` and `comparisons.csv`
    /// there and prints the tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Overrides the run directory's `run_config.toml`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the interactive session over a websocket at `/ws`.
    Serve {
        /// 0 picks a free port; the bound address is printed on stdout.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = DEFAULT_NECK)]
        phantom: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the default run config as TOML.
    Defaults,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            mode,
            phantom,
            trials,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(config.as_ref())?;
            let phantom = Arc::new(load_phantom(&phantom).with_context(|| format!("loading phantom {}", phantom.display()))?);
            let trials = trials.unwrap_or(cfg.harness.trials);
            for m in mode {
                if !(1..=4).contains(&m) {
                    bail!("mode must be 1-4, got {m}");
                }
                let records = run_batch(m, phantom.clone(), &cfg, trials, seed, Some(&out))?;
                let mean = records.iter().map(|r| r.error_norm).sum::<f64>() / records.len().max(1) as f64;
                let incomplete = records.iter().filter(|r| !r.complete).count();
                println!("mode {m}: {} trials, mean error {mean:.2} mm, {incomplete} incomplete", records.len());
            }
            println!("wrote {}", out.display());
        }
        Command::Report { input, config } => {
            let cfg = match config {
                Some(p) => load_config(Some(&p))?,
                None => {
                    let saved = input.join("run_config.toml");
                    if saved.exists() {
                        load_config(Some(&saved))?
                    } else {
                        RunConfig::default()
                    }
                }
            };
            let records = load_run_dir(&input)?;
            let report = build_report(&records, &cfg.harness)?;
            fs::write(input.join("summary.csv"), report.summary_csv())?;
            fs::write(input.join("comparisons.csv"), report.comparisons_csv())?;
            print!("{}", report.to_text());
        }
        Command::Serve {
            port,
            host,
            phantom,
            config,
            seed,
        } => {
            let cfg = load_config(config.as_ref())?;
            let phantom = Arc::new(load_phantom(&phantom).with_context(|| format!("loading phantom {}", phantom.display()))?);
            serve::run(&host, port, phantom, cfg, seed)?;
        }
        Command::Defaults => print!("{}", RunConfig::default().to_toml()),
    }
    Ok(())
}
