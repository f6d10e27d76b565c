//! `xdep`: simulate labelled spatial-extremes corpora, train the dependence
//! classifier, and apply it to station data.

pub mod commands;
pub mod config;
pub mod error;
pub mod observations;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "xdep", version, about = "Classify spatial extremal dependence with a CNN")]
pub struct Cli {
    /// JSON run configuration; every field has a default.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled corpus of dependence tensors.
    Simulate,
    /// Build the dependence tensor and directional profile of observed data.
    Featurize {
        #[arg(long, value_name = "CSV")]
        observations: Option<PathBuf>,
    },
    /// Train the classifier on a corpus.
    Train {
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
        /// Continue an earlier run from the files in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a model on every split and evaluation group of a corpus.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Classify observed data for each configured block size.
    Predict {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "CSV")]
        observations: Option<PathBuf>,
    },
}

/// Merges the config file with command-line overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match &cli.command {
        Command::Simulate => {}
        Command::Featurize { observations } => {
            if observations.is_some() {
                cfg.featurize.observations = observations.clone();
            }
        }
        Command::Train { corpus, resume } => {
            if corpus.is_some() {
                cfg.train.corpus = corpus.clone();
            }
            cfg.train.resume |= resume;
        }
        Command::Evaluate { corpus, model } => {
            if corpus.is_some() {
                cfg.evaluate.corpus = corpus.clone();
            }
            if model.is_some() {
                cfg.evaluate.model = model.clone();
            }
        }
        Command::Predict { model, observations } => {
            if model.is_some() {
                cfg.predict.model = model.clone();
            }
            if observations.is_some() {
                cfg.predict.observations = observations.clone();
            }
        }
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    cfg.resolve_paths();
    Ok(cfg)
}

/// Runs one parsed invocation inside a pool of the configured size.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Featurize { .. } => commands::featurize(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Predict { .. } => commands::predict(&cfg),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("xdep: {e}");
            e.exit_code()
        }
    }
}
