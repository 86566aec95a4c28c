use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sltrace_cli::commands::{cmd_eig, cmd_scan, cmd_trace, cmd_verify};
use sltrace_cli::config::RunConfig;
use sltrace_cli::output::write_atomic;
use sltrace_cli::{CliError, Outcome};

/// Eigenvalues, characteristic-function scans and regularized traces for
/// Sturm-Liouville problems with two transmission points.
#[derive(Debug, Parser)]
#[command(name = "sltrace", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lowest eigenvalues as CSV.
    Eig {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
    },
    /// Characteristic function and phase on a grid, as CSV.
    Scan {
        #[arg(long, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, allow_hyphen_values = true)]
        max: f64,
        #[arg(long)]
        points: usize,
    },
    /// Regularized trace report as JSON.
    Trace {
        /// Exit with status 4 when |deviation| exceeds this.
        #[arg(long)]
        assert_tol: Option<f64>,
    },
    /// Oracle and property checks.
    Verify,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let p = cfg.problem()?;
    match cli.command {
        Command::Eig { count } => cmd_eig(&p, count as usize),
        Command::Scan { min, max, points } => cmd_scan(&p, min, max, points),
        Command::Trace { assert_tol } => {
            cmd_trace(&p, cfg.trace.n_terms, cfg.trace.convention, assert_tol.or(cfg.trace.assert_tol))
        }
        Command::Verify => cmd_verify(&p),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        write_atomic(cli.out.as_deref(), &outcome.body)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
