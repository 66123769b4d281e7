// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use catgrape::cli::config::parse_config;
use catgrape::cli::run::{run_experiment, Command, EXIT_ERROR};

/// Optimal-control pulse synthesis and verification for cat-code qubits.
#[derive(Debug, Parser)]
#[command(name = "catgrape", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Existing waveform file, for the verify-only commands.
    #[arg(long, value_name = "PATH")]
    waveform: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Optimize a pulse for the configured target, then verify and report.
    Synthesize(Common),
    /// Closed- and open-system fidelities of an existing waveform.
    Simulate(Common),
    /// Wigner function of the state an existing waveform prepares.
    Wigner(Common),
    /// Logical process tomography of an existing waveform.
    Ptomo(Common),
    /// Randomized benchmarking as configured in [rb].
    Rb(Common),
    /// Apply the dispersion/delay correction to an existing waveform.
    Correct(Common),
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let (command, args) = match cli.command {
        Sub::Synthesize(a) => (Command::Synthesize, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Wigner(a) => (Command::Wigner, a),
        Sub::Ptomo(a) => (Command::Ptomo, a),
        Sub::Rb(a) => (Command::Rb, a),
        Sub::Correct(a) => (Command::Correct, a),
    };
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = args.out {
        cfg = cfg.with_output_dir(out);
    }
    let outcome = run_experiment(&cfg, command, args.waveform.as_deref())?;
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
