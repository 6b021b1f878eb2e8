//! Reproducible pipelines around the `priorfill` library: generate scenes,
//! synthesize priors, pre-fill, evaluate and benchmark from one TOML file.

pub mod config;
pub mod error;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_DATA};
pub use pipeline::{Command, Pipeline};

const DEFAULT_OUT_DIR: &str = "priorfill-out";

#[derive(Debug, Parser)]
#[command(name = "priorfill", version, about = "Metric pre-filling of incomplete depth priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Write gt.pfm and pred.pfm for each configured scene.
    Scene,
    /// Write each named prior as PFM and 16-bit PNG.
    Synth,
    /// Write the filled map for every prior and method.
    Prefill,
    /// Evaluate every prior and method and write report.json.
    Eval,
    /// Run the scenes x priors x methods matrix and write aggregated report.json.
    Bench,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Scene => Command::Scene,
            CliCommand::Synth => Command::Synth,
            CliCommand::Prefill => Command::Prefill,
            CliCommand::Eval => Command::Eval,
            CliCommand::Bench => Command::Bench,
        }
    }
}

/// Executes parsed arguments.
pub fn run(cli: &Cli) -> CliResult<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let base_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let pipeline = Pipeline::new(config, base_dir, out);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| pipeline.run(cli.command.into()))
}

/// Runs and maps the outcome to a process exit status, printing the typed
/// error name on stderr.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            e.exit_code()
        }
    }
}
