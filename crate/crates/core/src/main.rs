use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use delaywave::harness::{cmd_certify, cmd_compare_backends, cmd_convergence, cmd_simulate, cmd_sweep};
use delaywave::simulation::RunOptions;
use delaywave::solver::Backend;
use delaywave::{Error, Result};

/// Damped wave transmission with time-varying delay: simulation and
/// stability diagnostics.
#[derive(Debug, Parser)]
#[command(name = "delaywave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV and JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct RunFlags {
    /// Run even if the hypotheses are not certified.
    #[arg(long)]
    override_certificate: bool,
    /// Delay backend: `augmented` or `history`.
    #[arg(long)]
    backend: Option<Backend>,
}

impl RunFlags {
    fn options(&self) -> RunOptions {
        RunOptions {
            override_certificate: self.override_certificate,
            backend: self.backend,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify, run, analyze; writes trajectory.csv and report.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check the hypotheses and search for Lyapunov constants.
    Certify {
        #[command(flatten)]
        common: Common,
    },
    /// Concurrent runs over values of one numeric config leaf.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// Dotted config path, e.g. `weights.beta`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Run both delay backends and report their difference.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Observed order of accuracy over successively halved resolutions.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(text)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, file: &str) -> Result<()> {
    let text = print_json(value)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(file), &text)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, run } => {
            let report = cmd_simulate(&common.config, &run.options(), common.out.as_deref())?;
            print_json(&report)?;
        }
        Command::Certify { common } => {
            let report = cmd_certify(&common.config)?;
            emit(&report, common.out.as_deref(), "certificate.json")?;
            if !report.passed {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep { common, run, axis, values } => {
            let rows = cmd_sweep(&common.config, &axis, &values, &run.options(), common.out.as_deref())?;
            print_json(&rows)?;
        }
        Command::Compare { common } => {
            let report = cmd_compare_backends(&common.config)?;
            emit(&report, common.out.as_deref(), "comparison.json")?;
        }
        Command::Convergence { common, levels } => {
            let report = cmd_convergence(&common.config, levels)?;
            emit(&report, common.out.as_deref(), "convergence.json")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    execute(cli).unwrap_or_else(|e: Error| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
