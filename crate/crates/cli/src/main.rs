//! `abelconv`: spectra of random group convolutions, the single-step attack,
//! bound verification experiments, distance-scaling sweeps and network dumps.
//!
//! Exit status: 0 on success, 1 on configuration or structural errors (a JSON
//! object naming the failing field goes to stderr), 2 when `verify` finds an
//! asserted bound violated.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use abelconv::error::Error;
use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Parser, Subcommand};
use serde_json::json;

use config::{RunConfig, Settings, SEED_ENV};

pub const GIT_DESCRIBE: &str = env!("ABELCONV_GIT_DESCRIBE");

#[derive(Parser, Debug)]
#[command(name = "abelconv", version, about, long_about = None)]
#[command(after_help = "Settings come from experiment defaults, then --config, then flags. \
The master seed falls back to $ABELCONV_SEED, then 0.")]
struct Cli {
    /// Flat TOML file with the same keys as the flags (snake_case)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout
    #[arg(long, global = true)]
    json: bool,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact singular values of one random layer (widths = d,q) via character blocks
    Spectra {
        /// Use the identity layer on `d` channels instead of a random one
        #[arg(long)]
        identity: bool,
        /// Also run the dense SVD and report timings and the deviation
        #[arg(long)]
        dense: bool,
    },
    /// Single-step gradient attack on one random network and input
    Attack,
    /// Run a seeded bound-checking experiment (see --experiment)
    Verify,
    /// Attack distance-scaling sweep over --sweep-group values
    Sweep,
    /// Write a random network bundle as JSON
    NetDump,
}

pub enum Failure {
    /// A configuration or structural problem.
    Error(Error),
    /// `verify` ran but an asserted bound failed.
    Bounds,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    match e {
        Error::InvalidConfig { field, reason } => {
            json!({"error": "invalid-config", "field": field, "message": reason})
        }
        Error::Structural(msg) => json!({"error": "structural", "message": msg}),
        Error::Capacity { entries, cap } => json!({
            "error": "capacity", "field": "dense", "message": e.to_string(),
            "entries": entries.to_string(), "cap": cap.to_string(),
        }),
        Error::DegenerateAttack { output, grad_norm } => json!({
            "error": "degenerate-attack", "message": e.to_string(),
            "output": output, "grad_norm": grad_norm,
        }),
        Error::Io(_) => json!({"error": "io", "message": e.to_string()}),
        other => json!({"error": "internal", "message": other.to_string()}),
    }
}

fn clap_error_json(e: &clap::Error) -> serde_json::Value {
    let field = match e.get(ContextKind::InvalidArg) {
        Some(ContextValue::String(s)) => s
            .trim_start_matches('-')
            .split([' ', '='])
            .next()
            .unwrap_or_default()
            .replace('-', "_"),
        _ => "arguments".to_owned(),
    };
    json!({"error": "invalid-arguments", "field": field, "message": e.render().to_string().trim()})
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let settings = file.overlay(cli.settings);
    let env_seed = std::env::var(SEED_ENV).ok();
    use abelconv::verify::Experiment;
    let base = match cli.command {
        Command::Spectra { .. } => Experiment::Spectrum,
        Command::Verify => Experiment::Gradient,
        Command::Attack | Command::Sweep | Command::NetDump => Experiment::Attack,
    };
    let is_verify = matches!(cli.command, Command::Verify);
    if is_verify != settings.experiment.is_some() {
        let reason = if is_verify {
            "`verify` needs --experiment (spectrum, gradient, output, robustness or attack)"
        } else {
            "only `verify` takes an experiment"
        };
        return Err(Error::InvalidConfig {
            field: "experiment".into(),
            reason: reason.into(),
        }
        .into());
    }
    let cfg = RunConfig::resolve(base, settings, env_seed)?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    match cli.command {
        Command::Spectra { identity, dense } => commands::spectra(&cfg, identity, dense, cli.json),
        Command::Attack => commands::attack(&cfg, cli.json),
        Command::Verify => commands::verify(&cfg, cli.json),
        Command::Sweep => commands::sweep(&cfg, cli.json),
        Command::NetDump => commands::net_dump(&cfg, cli.json),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", clap_error_json(&e));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Bounds) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(1)
        }
    }
}
