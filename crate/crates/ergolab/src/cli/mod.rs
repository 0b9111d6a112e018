//! Command-line front end: `ergolab <experiment> --config <file>`.
//!
//! Subcommands name the experiment to run; `--config` points at the JSON
//! description and must agree with the config's own `experiment` field.
//! `--out`, `--seeds`, and `--horizon` override the corresponding config
//! fields before validation. The extra `bundle` subcommand collects a
//! completed run into a plot manifest.
//!
//! Exit codes:
//! * `0` -- the run completed and every verdict passed;
//! * `1` -- the run completed but a verdict failed (see `summary.json`);
//! * `2` -- the config is invalid (diagnostics carry `file:line:` anchors);
//! * `3` -- a numerical or I/O failure interrupted the run;
//! * `4` -- `bundle` found required outputs missing.

pub mod bundle;
pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

use self::bundle::BundleOutcome;
use self::config::ExperimentKind;

#[derive(Debug, Parser)]
#[command(
    name = "ergolab",
    version,
    about = "Numerical laboratory for subadditive cocycles over ergodic drivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed list (comma-separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the drift of the orbit cocycle.
    Drift(RunArgs),
    /// Detect good times and report density curves.
    Goodtimes(RunArgs),
    /// Extract a metric functional and verify its linear growth.
    Functional(RunArgs),
    /// Extract a norm-one dual functional certifying linear escape.
    Banach(RunArgs),
    /// Average an operator orbit and compare norm and metric rates.
    Meanergodic(RunArgs),
    /// Classify a disk orbit: boundary limit, no drift, or inconclusive.
    Wolffdenjoy(RunArgs),
    /// Run the stabilized operator cocycle against the QR oracle.
    Oseledets(RunArgs),
    /// Partition the time axis into unit steps and bad jumps.
    Decompose(RunArgs),
    /// Collect a completed run into a plot manifest.
    Bundle(RunArgs),
}

impl Command {
    /// The experiment this subcommand must match; `None` for `bundle`,
    /// which serves whatever experiment the config names.
    fn expected_kind(&self) -> Option<ExperimentKind> {
        match self {
            Command::Drift(_) => Some(ExperimentKind::Drift),
            Command::Goodtimes(_) => Some(ExperimentKind::Goodtimes),
            Command::Functional(_) => Some(ExperimentKind::Functional),
            Command::Banach(_) => Some(ExperimentKind::Banach),
            Command::Meanergodic(_) => Some(ExperimentKind::Meanergodic),
            Command::Wolffdenjoy(_) => Some(ExperimentKind::Wolffdenjoy),
            Command::Oseledets(_) => Some(ExperimentKind::Oseledets),
            Command::Decompose(_) => Some(ExperimentKind::Decompose),
            Command::Bundle(_) => None,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Drift(a)
            | Command::Goodtimes(a)
            | Command::Functional(a)
            | Command::Banach(a)
            | Command::Meanergodic(a)
            | Command::Wolffdenjoy(a)
            | Command::Oseledets(a)
            | Command::Decompose(a)
            | Command::Bundle(a) => a,
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) => 2,
        _ => 3,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    dispatch(&cli.command)
}

fn dispatch(command: &Command) -> i32 {
    let args = command.args();
    let (mut cfg, text) = match config::load_config(&args.config) {
        Ok(loaded) => loaded,
        Err(diag) => {
            eprintln!("{}", diag.render(&args.config));
            return 2;
        }
    };

    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(horizon) = args.horizon {
        cfg.horizon = horizon;
    }

    let is_bundle = matches!(command, Command::Bundle(_));
    if let Some(kind) = command.expected_kind() {
        if kind != cfg.experiment {
            let line = config::line_of_key(&text, "experiment");
            eprintln!(
                "{}:{line}: config declares experiment \"{}\" but the \"{}\" subcommand \
                 was invoked",
                args.config.display(),
                cfg.experiment.name(),
                kind.name()
            );
            return 2;
        }
    }

    let resolved = match config::resolve(cfg, &text) {
        Ok(r) => r,
        Err(diags) => {
            for diag in &diags {
                eprintln!("{}", diag.render(&args.config));
            }
            return 2;
        }
    };

    if is_bundle {
        return match bundle::emit_bundle(&resolved) {
            Ok(BundleOutcome::Written(path)) => {
                println!("wrote {}", path.display());
                0
            }
            Ok(BundleOutcome::Missing(files)) => {
                for file in &files {
                    eprintln!("missing run output: {file}");
                }
                eprintln!("run `ergolab {} --config ...` first", resolved.config.experiment.name());
                4
            }
            Err(e) => {
                eprintln!("bundle failed: {e}");
                exit_code_for(&e)
            }
        };
    }

    match run::run(&resolved) {
        Ok(outcome) => {
            println!(
                "{}: verdict {} ({})",
                resolved.config.experiment.name(),
                if outcome.verdict { "pass" } else { "FAIL" },
                outcome.summary_path.display()
            );
            if outcome.verdict {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{} failed: {e}", resolved.config.experiment.name());
            exit_code_for(&e)
        }
    }
}
