//! `cmvlab` command-line front end.
//!
//! Every subcommand reads an optional JSON config, applies flag overrides,
//! writes CSV/JSON outputs to `--out` and a `manifest.json` describing the run.
//! Exit status is 0 on success, 2 for invalid input and 3 for numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl From<cmvlab::Error> for CliError {
    fn from(e: cmvlab::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "cmvlab", version, about = "CMV spectra, Lyapunov zero sets, Weyl diagnostics and quantum walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, env = "CMVLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Band functions, derivatives and the band set of a periodic sequence
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        nk: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Lyapunov sweep and its thresholded zero set
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        n_steps: Option<i64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Band-set approximation and sum-criterion report for a limit-periodic family
    Approx {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        n_steps: Option<i64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Coined quantum walk: distribution and survival
    Walk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Residuals of the squared sieved operator's splitting
    SieveCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Reflectionless defect of the Weyl coefficients on an arc set
    WeylDefect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
        /// Use the band set at this period as the arc set
        #[arg(long)]
        q: Option<usize>,
    },
}

fn opt<T: Into<Value>>(v: Option<T>) -> Value {
    v.map(Into::into).unwrap_or(Value::Null)
}

fn setup(common: &Common, mut overrides: Vec<(&'static str, Value)>) -> Result<serde_json::Map<String, Value>, CliError> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    overrides.push(("seed", opt(common.seed)));
    config::load(common.config.as_deref(), overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = |c: &Common| -> PathBuf { c.out.clone() };
    match cli.command {
        Command::Bands { common, q, nk, resolution } => {
            let m = setup(&common, vec![("q", opt(q)), ("nk", opt(nk)), ("resolution", opt(resolution))])?;
            commands::bands(config::parse(&m)?, &out(&common))
        }
        Command::Lyapunov { common, grid, n_steps, eps } => {
            let m = setup(&common, vec![("grid", opt(grid)), ("n_steps", opt(n_steps)), ("eps", opt(eps))])?;
            commands::lyapunov(config::parse(&m)?, &out(&common))
        }
        Command::Approx { common, grid, n_steps, eps } => {
            let m = setup(&common, vec![("grid", opt(grid)), ("n_steps", opt(n_steps)), ("eps", opt(eps))])?;
            commands::approx(config::parse(&m)?, &out(&common))
        }
        Command::Walk { common, steps } => {
            let m = setup(&common, vec![("steps", opt(steps))])?;
            commands::walk(config::parse(&m)?, &out(&common))
        }
        Command::SieveCheck { common, dim } => {
            let m = setup(&common, vec![("dim", opt(dim))])?;
            commands::sieve_check(config::parse(&m)?, &out(&common))
        }
        Command::WeylDefect { common, r, samples, k, q } => {
            let m = setup(&common, vec![("r", opt(r)), ("samples", opt(samples)), ("k", opt(k)), ("q", opt(q))])?;
            commands::weyl_defect(config::parse(&m)?, &out(&common))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
