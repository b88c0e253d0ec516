//! `dirgrad` command-line harness: config parsing, experiment runs, planning,
//! verification suites and parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod experiment;
pub mod seeds;
pub mod summary;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Overrides, Suite, VerifyParams};
use crate::config::{parse_config, ExperimentConfig, Format};

/// Exit status for configuration and usage errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failed verifications and runtime errors.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} verification report(s) failed")]
    Failed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dirgrad", version, about = "Directional-derivative stochastic optimization experiments")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed list such as `1,2,5-8`; replaces the config's seeds.
    #[arg(long, global = true, value_name = "LIST")]
    pub seed: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "INT")]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output directory; replaces the config's.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured algorithm over all seeds.
    Run,
    /// Print planned parameters for a target accuracy.
    Plan {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run verification suites and print JSON-lines reports.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
        /// Dimension (defaults depend on the suite).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<u64>,
        /// Mirror-step instances.
        #[arg(long, default_value_t = 100)]
        instances: u64,
        /// Mirror-step tolerance (max-norm).
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        /// Finite-difference value noise.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Sweep `N` or `n` and fit log-log slopes.
    Sweep,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("DIRGRAD_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn overrides(cli: &Cli) -> Result<Overrides, CliError> {
    let seeds = match &cli.seed {
        Some(s) => Some(seeds::parse_seed_list(s).map_err(|e| CliError::Config(e.to_string()))?),
        None => None,
    };
    Ok(Overrides {
        seeds,
        format: cli.format,
        out: cli.out.clone(),
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let ov = overrides(&cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Run => {
            let mut cfg = load_config(&cli)?;
            ov.apply(&mut cfg);
            commands::cmd_run(cfg).map(|_| ())
        }
        Command::Plan { epsilon } => {
            let cfg = load_config(&cli)?;
            let plan = commands::cmd_plan(cfg, *epsilon)?;
            match cli.format {
                Some(Format::Json) => {
                    println!("{}", serde_json::to_string_pretty(&plan).map_err(|e| CliError::Runtime(e.to_string()))?)
                }
                _ => print!("{plan}"),
            }
            Ok(())
        }
        Command::Verify {
            suite,
            n,
            samples,
            instances,
            tol,
            t,
            delta,
        } => {
            let params = VerifyParams {
                n: *n,
                samples: *samples,
                instances: *instances,
                tol: *tol,
                t: *t,
                delta: *delta,
            };
            let seeds = ov.seeds.clone().unwrap_or_else(|| vec![0]);
            let mut lines = String::new();
            let mut failed = 0;
            for seed in seeds {
                for r in commands::cmd_verify(*suite, &params, seed)? {
                    let line = r.to_json_line();
                    println!("{line}");
                    if !r.pass {
                        eprintln!("FAIL {line}");
                        failed += 1;
                    }
                    lines.push_str(&line);
                    lines.push('\n');
                }
            }
            if let Some(dir) = &ov.out {
                fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
                let path = dir.join("verify.jsonl");
                fs::write(&path, lines).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            }
            if failed > 0 {
                return Err(CliError::Failed(failed));
            }
            Ok(())
        }
        Command::Sweep => {
            let mut cfg = load_config(&cli)?;
            ov.apply(&mut cfg);
            commands::cmd_sweep(cfg).map(|_| ())
        }
    })
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
