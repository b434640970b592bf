//! widthlab command-line front end.
//!
//! Subcommands: estimate-width, verify-theorem2, besov-check, scaling-sweep,
//! kashin-table. Every command reads a JSON config (`--config`), may override
//! its seed (`--seed`), writes artifacts atomically under `--out`, and prints
//! a one-line summary. Exit codes: 0 success or inconclusive, 1 config error,
//! 2 numerical non-convergence, 3 condition failure.

mod commands;
mod configs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use widthlab::error::Error;

#[derive(Parser, Debug)]
#[command(name = "widthlab", version, about = "Width estimation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed override (defaults to the config's seed, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (fallback: WIDTHLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the width of a product of octahedra in a mixed norm.
    EstimateWidth,
    /// Run the Monte-Carlo checks behind the width lower bound.
    VerifyTheorem2,
    /// Wavelet invariants and the L_p sequence-norm sandwich.
    BesovCheck,
    /// n-sweeps over the discretized Besov problems with exponent fits.
    ScalingSweep,
    /// Two-sided table for octahedra in ℓ_q.
    KashinTable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("widthlab: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } | Error::Stagnation(_) => 2,
        Error::ConditionsFailed { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> widthlab::Result<ExitCode> {
    let threads = cli.threads.or_else(|| {
        std::env::var("WIDTHLAB_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // ignore failure: the pool may already be initialized in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::input("--config is required"))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", config_path.display())))?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out)?;

    let parse_err = |e: serde_json::Error| Error::input(format!("config: {e}"));
    match cli.command {
        Command::EstimateWidth => {
            let cfg: configs::EstimateWidthConfig =
                serde_json::from_str(&text).map_err(parse_err)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            commands::cmd_estimate_width(cfg, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTheorem2 => {
            let cfg: configs::VerifyTheorem2Config =
                serde_json::from_str(&text).map_err(parse_err)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            let (_, _violated) = commands::cmd_verify_theorem2(cfg, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BesovCheck => {
            let cfg: configs::BesovCheckConfig =
                serde_json::from_str(&text).map_err(parse_err)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            commands::cmd_besov_check(cfg, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ScalingSweep => {
            let cfg: configs::ScalingSweepConfig =
                serde_json::from_str(&text).map_err(parse_err)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            commands::cmd_scaling_sweep(cfg, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::KashinTable => {
            let cfg: configs::KashinTableConfig =
                serde_json::from_str(&text).map_err(parse_err)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            commands::cmd_kashin_table(cfg, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
