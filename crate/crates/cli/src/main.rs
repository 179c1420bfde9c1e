#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{parse_overrides, ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "kacfick",
    version,
    about = "Stationary Kac-potential magnetization profiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Solve,
    Shoot,
    Sweep,
    Constants,
    Validate,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configuration overrides as `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-point solve with the configured reservoir values as inputs.
    Solve(RunArgs),
    /// Solve so that the profile's endpoint values hit the configured ones.
    Shoot(RunArgs),
    /// Solve over the configured epsilon list and fit the drift exponent.
    Sweep(RunArgs),
    /// Constants of the convergence argument.
    Constants(RunArgs),
    /// Invariant checks on the configured instance.
    Validate(RunArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(kacfick::Error),
    #[error("{0}")]
    Regime(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<kacfick::Error> for CliError {
    fn from(e: kacfick::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Solver(e)
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(e) if e.is_config_error() => 2,
            CliError::Solver(_) | CliError::Regime(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) | CliError::Regime(_) => "solver",
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    status: &'static str,
    kind: &'static str,
    exit_code: u8,
    message: String,
    /// Iteration history attached to budget overruns.
    history: Option<&'a [f64]>,
}

/// Pulls `--out`/`--config` out of the override tokens, where clap leaves
/// them once the trailing overrides have started.
fn split_paths(args: RunArgs) -> (Option<PathBuf>, Option<PathBuf>, Vec<String>) {
    let (mut config, mut out) = (args.config, args.out);
    let mut rest = Vec::new();
    let mut it = args.overrides.into_iter();
    while let Some(tok) = it.next() {
        let (key, inline) = match tok.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (tok.clone(), None),
        };
        let slot = match key.as_str() {
            "--out" => &mut out,
            "--config" => &mut config,
            _ => {
                rest.push(tok);
                continue;
            }
        };
        match inline.or_else(|| it.next()) {
            Some(v) => *slot = Some(PathBuf::from(v)),
            None => rest.push(tok),
        }
    }
    (config, out, rest)
}

fn run(kind: Kind, args: RunArgs) -> (Option<PathBuf>, Result<(), CliError>) {
    let (config_path, out, rest) = split_paths(args);
    let result = (|| {
        let out = out
            .as_deref()
            .ok_or_else(|| CliError::Config("missing --out <dir>".into()))?;
        let overrides = parse_overrides(&rest)?;
        let config = RunConfig::load(config_path.as_deref(), &overrides)?;
        match kind {
            Kind::Solve => commands::run_solve(&config, out),
            Kind::Shoot => commands::run_shoot(&config, out),
            Kind::Sweep => commands::run_sweep(&config, out),
            Kind::Constants => commands::run_constants(&config, out),
            Kind::Validate => commands::run_validate(&config, out),
        }
    })();
    (out, result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Solve(a) => (Kind::Solve, a),
        Command::Shoot(a) => (Kind::Shoot, a),
        Command::Sweep(a) => (Kind::Sweep, a),
        Command::Constants(a) => (Kind::Constants, a),
        Command::Validate(a) => (Kind::Validate, a),
    };
    let (out, result) = run(kind, args);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if let Some(dir) = out {
                let history = match &e {
                    CliError::Solver(kacfick::Error::MaxIterations { history, .. }) => {
                        Some(history.as_slice())
                    }
                    _ => None,
                };
                let report = ErrorReport {
                    status: "error",
                    kind: e.kind(),
                    exit_code: code,
                    message: e.to_string(),
                    history,
                };
                if let Err(io) = output::write_json(&dir, "error.json", &report) {
                    eprintln!("error: could not write error.json: {io}");
                }
            }
            ExitCode::from(code)
        }
    }
}
