//! `bench`: runs benchmark suites and post-processes their output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prefbo::bench::{aggregate, plot_data, read_aggregate, read_runs_csv, run_suite, write_aggregate, SuiteConfig};
use prefbo::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "bench", version, about = "Benchmark suites for utility-aware Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (problem, policy, replication) of a suite.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        /// Overrides the suite's seed base.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild the summary table from the per-run CSVs of a run directory.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median and interquartile curves from a summary table, as JSON.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidField { .. } | Error::Json(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

fn run(suite: &Path, out: &Path, parallel: usize, seed: Option<u64>) -> Result<u8, Failure> {
    let text = fs::read_to_string(suite).map_err(|e| config_error(suite, e))?;
    let mut cfg = SuiteConfig::from_json(&text).map_err(|e| config_error(suite, e))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = run_suite(&cfg, parallel)?;
    result.write(out)?;
    let failed = result.failures();
    eprintln!("{} runs, {failed} failed, output in {}", result.runs.len(), out.display());
    for o in &result.runs {
        if let Err(e) = &o.result {
            eprintln!("  {} {} replication {}: {e}", o.problem, o.policy, o.replication);
        }
    }
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            suite,
            out,
            parallel,
            seed,
        } => run(&suite, &out, parallel, seed),
        Command::Aggregate { input, out } => read_runs_csv(&input)
            .and_then(|rows| write_aggregate(&out, &aggregate(&rows)))
            .map(|_| 0)
            .map_err(Failure::from),
        Command::Plotdata { input, out } => read_aggregate(&input)
            .map_err(|e| config_error(&input, e))
            .and_then(|rows| {
                let json = serde_json::to_string_pretty(&plot_data(&rows)).map_err(|e| config_error(&out, e))?;
                fs::write(&out, json).map_err(|e| Failure {
                    code: EXIT_FAILURE,
                    message: format!("{}: {e}", out.display()),
                })
            })
            .map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
