//! Command-line front end: `dualcan preprocess|train|eval|explain|synth`.

pub mod commands;
pub mod config;
pub mod error;
pub mod heatmap;
pub mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dualcan_core::data::synth::{CueSources, SynthSpec};
use dualcan_core::model::Mode;
use dualcan_core::Profile;

use commands::Target;
use config::{Overrides, RunConfig};
use error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "dualcan", version, about = "Dual co-attention fake-news detector")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Hyperparameter profile: gossipcop, coaid or desk.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Input mode: N+C, N+E or N+C+E.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Seed for initialisation and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let overrides = Overrides {
            profile: self.profile,
            mode: self.mode,
            seed: self.seed,
            out: self.out.clone(),
        };
        RunConfig::load(&self.config, &overrides)
    }
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Split of the configured data to use.
    #[arg(long, default_value = "test", conflicts_with = "dataset")]
    pub split: String,
    /// Evaluate a separate dataset file instead of a split.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

impl TargetArgs {
    fn target(&self) -> Target {
        match &self.dataset {
            Some(p) => Target::File(p.clone()),
            None => Target::Split(self.split.clone()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and encode the data; write vocabulary and split assignment.
    Preprocess(RunArgs),
    /// Train a model and report test metrics.
    Train(RunArgs),
    /// Evaluate a checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Export attention weights and heatmaps.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        /// Comma-separated sample ids; defaults to every sample of the target.
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<String>>,
    },
    /// Generate a synthetic corpus with planted label cues.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        size: usize,
        #[arg(long, default_value_t = 0.5)]
        fake_fraction: f64,
        /// Cue sources: any of news, comments, entities, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        cues: Vec<String>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

pub fn parse_cues(names: &[String]) -> CliResult<CueSources> {
    let mut cues = CueSources {
        news: false,
        comments: false,
        entities: false,
    };
    for n in names {
        match n.trim().to_ascii_lowercase().as_str() {
            "all" => cues = CueSources::ALL,
            "news" => cues.news = true,
            "comments" => cues.comments = true,
            "entities" => cues.entities = true,
            other => return Err(CliError::Usage(format!("unknown cue source `{other}`"))),
        }
    }
    Ok(cues)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Preprocess(run) => commands::cmd_preprocess(&run.load()?).map(drop),
        Command::Train(run) => commands::cmd_train(&run.load()?).map(drop),
        Command::Eval {
            run,
            checkpoint,
            target,
        } => commands::cmd_eval(&run.load()?, &checkpoint, &target.target()).map(drop),
        Command::Explain {
            run,
            checkpoint,
            target,
            ids,
        } => commands::cmd_explain(&run.load()?, &checkpoint, &target.target(), ids.as_deref())
            .map(drop),
        Command::Synth {
            out,
            size,
            fake_fraction,
            cues,
            dim,
            seed,
        } => {
            let spec = SynthSpec {
                size,
                fake_fraction,
                cues: parse_cues(&cues)?,
                embedding_dim: dim,
                seed,
            };
            commands::cmd_synth(&spec, &out)
        }
    }
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
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
