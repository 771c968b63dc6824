use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;

/// Reproducible, config-driven runs of the rainfall model.
#[derive(Parser, Debug)]
#[command(name = "rainfall-carma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for stochastic commands; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fit seasonality, kernel and driving noise to a gauge series.
    Fit,
    /// Simulate rainfall paths from a model and report zero proportions.
    Simulate,
    /// Compare a gauge series with simulations from a model.
    Diagnose,
    /// Swap prices over a grid of constant market prices of risk.
    Price,
    /// Market prices of risk implied by swap quotes.
    Calibrate,
    /// Stationary-bootstrap confidence intervals.
    Bootstrap,
}

/// Bad input from the user: a malformed config, a missing seed, a bad flag.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<rainfall_carma::Error>() {
            return match e {
                e if e.is_numeric() => EXIT_NUMERIC,
                rainfall_carma::Error::Io { .. } => EXIT_FAILURE,
                _ => EXIT_INVALID,
            };
        }
    }
    EXIT_FAILURE
}

pub struct Context<'a> {
    pub seed: Option<u64>,
    pub out: &'a Path,
    /// Directory relative config paths are resolved against.
    pub base: PathBuf,
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!(Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let Some(config) = &cli.config else {
        anyhow::bail!(Invalid("--config is required".into()));
    };
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Context {
        seed: cli.seed,
        out: &cli.out,
        base: config.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    match cli.command {
        Command::Fit => commands::fit(&config::load(config)?, &ctx),
        Command::Simulate => commands::simulate(&config::load(config)?, &ctx),
        Command::Diagnose => commands::diagnose(&config::load(config)?, &ctx),
        Command::Price => commands::price(&config::load(config)?, &ctx),
        Command::Calibrate => commands::calibrate(&config::load(config)?, &ctx),
        Command::Bootstrap => commands::bootstrap(&config::load(config)?, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
