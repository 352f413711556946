//! Command-line front end for block-size selection studies.
//!
//! Every workflow is driven by a declarative TOML configuration (see the
//! bundled `configs/`): `optimize` runs the Bayesian search, `enumerate` and
//! `baseline` produce the comparison strategies, `validate` scores a front
//! on held-out data, `compare` tabulates finished runs, and `simulate`
//! writes a synthetic dataset to disk.
//!
//! Exit codes: 0 success, 1 usage/configuration, 2 data, 3 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blockmax::baselines::Strategy;
use blockmax::Error;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "blockmax", version, about = "Block size selection for block-maxima extreme value analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the command's primary seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Cap worker threads.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory (defaults to output.dir from the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cold-cache timing mode: record wall times in artifacts. Timed
    /// artifacts are not byte-reproducible across runs.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-objective Bayesian optimizer.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every spec in the decision box and report the exact front.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Take the reference point from a previous run's output directory.
        #[arg(long, value_name = "DIR")]
        ref_from: Option<PathBuf>,
    },
    /// Run a comparison strategy (random or structured).
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Evaluation budget (defaults to baseline.budget from the config).
        #[arg(long, value_name = "N")]
        budget: Option<usize>,
        /// Take the reference point from a previous run's output directory.
        #[arg(long, value_name = "DIR")]
        ref_from: Option<PathBuf>,
    },
    /// Score a front on held-out domains (files or synthetic replications).
    Validate {
        #[command(flatten)]
        common: Common,
        /// Front table to validate (defaults to validate.front).
        #[arg(long, value_name = "PATH")]
        front: Option<PathBuf>,
    },
    /// Tabulate finished runs against an optimize run.
    Compare {
        /// Output directory of the optimize run.
        #[arg(long, value_name = "DIR")]
        mobo: PathBuf,
        /// Output directories of baseline/enumerate runs.
        #[arg(long = "baseline", value_name = "DIR", num_args = 1..)]
        baselines: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
    },
    /// Generate a synthetic dataset and write it as a grid file.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the binary format instead of text.
        #[arg(long)]
        binary: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Random,
    Structured,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Random => Strategy::Random,
            StrategyArg::Structured => Strategy::Structured,
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Problem(_) | Error::Baseline(_) => 1,
        Error::Io(_)
        | Error::Grid(_)
        | Error::GridParse { .. }
        | Error::SelectorOutOfBounds(_)
        | Error::Report(_)
        | Error::Comparison(_)
        | Error::Validation(_) => 2,
        Error::Sample(_)
        | Error::Estimation(_)
        | Error::Infeasible(_)
        | Error::Surrogate(_)
        | Error::Optimization(_) => 3,
    }
}

fn init_workers(workers: Option<usize>) -> blockmax::Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> blockmax::Result<()> {
    match cli.command {
        Command::Optimize { common } => {
            init_workers(common.workers)?;
            let config = RunConfig::load(&common.config)?;
            let out = common.out.unwrap_or_else(|| config.output.dir.clone());
            commands::cmd_optimize(&config, &out, common.seed, common.timing)
        }
        Command::Enumerate { common, ref_from } => {
            init_workers(common.workers)?;
            let config = RunConfig::load(&common.config)?;
            let out = common.out.unwrap_or_else(|| config.output.dir.clone());
            commands::cmd_enumerate(&config, &out, ref_from.as_deref(), common.timing)
        }
        Command::Baseline { common, strategy, budget, ref_from } => {
            init_workers(common.workers)?;
            let config = RunConfig::load(&common.config)?;
            let out = common.out.unwrap_or_else(|| config.output.dir.clone());
            commands::cmd_baseline(
                &config,
                &out,
                strategy.into(),
                budget,
                common.seed,
                ref_from.as_deref(),
                common.timing,
            )
        }
        Command::Validate { common, front } => {
            init_workers(common.workers)?;
            let config = RunConfig::load(&common.config)?;
            let out = common.out.unwrap_or_else(|| config.output.dir.clone());
            commands::cmd_validate(&config, &out, front.as_deref(), common.seed)
        }
        Command::Compare { mobo, baselines, out, workers } => {
            init_workers(workers)?;
            commands::cmd_compare(&mobo, &baselines, &out)
        }
        Command::Simulate { common, binary } => {
            init_workers(common.workers)?;
            let config = RunConfig::load(&common.config)?;
            let out = common.out.unwrap_or_else(|| config.output.dir.clone());
            commands::cmd_simulate(&config, &out, common.seed, binary)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
