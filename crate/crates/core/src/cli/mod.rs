//! The `scenmine` command line: one subcommand per pipeline stage.

pub mod config;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::Config;
pub use stages::{Summary, Variant};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "scenmine", version, about = "Highway scenario mining pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.codebook_size=16`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Working directory holding every artifact.
    #[arg(long, short, default_value = "run", global = true)]
    pub dir: PathBuf,
    /// Worker cap; stages currently run on one thread.
    #[arg(long, default_value_t = 1, global = true)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trajectory corpus with ground truth.
    Synth,
    /// Read highD-layout recordings.
    Ingest {
        /// Directory with `NN_tracks.csv` and `NN_recordingMeta.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Detect behavior changes and score detectors against annotations.
    Detect,
    /// Extract scenario records around change points.
    Extract,
    /// Split records and add irrelevant-vehicle variants.
    Augment,
    /// Train the autoencoder.
    Train {
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Assign the evaluation set to clusters.
    Cluster {
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Compute purity and augmentation accuracy.
    Evaluate {
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Render the result tables.
    Report,
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Check a trained variant instead of the toy problem.
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Run every stage for both variants.
    Pipeline,
}

fn variants(v: Option<Variant>) -> Vec<Variant> {
    v.map_or(Variant::ALL.to_vec(), |v| vec![v])
}

/// Runs one parsed command and returns the stage summaries.
pub fn execute(cli: &Cli) -> Result<Vec<Summary>> {
    let cfg = Config::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    let dir = cli.common.dir.as_path();
    log::debug!("config: {cfg:?}");
    Ok(match &cli.command {
        Command::Synth => vec![stages::synth(&cfg, dir)?],
        Command::Ingest { input } => vec![stages::ingest(&cfg, input.as_deref(), dir)?],
        Command::Detect => vec![stages::detect(&cfg, dir)?],
        Command::Extract => vec![stages::extract(&cfg, dir)?],
        Command::Augment => vec![stages::augment(&cfg, dir)?],
        Command::Train { variant } => variants(*variant)
            .into_iter()
            .map(|v| stages::train(&cfg, v, dir))
            .collect::<Result<_>>()?,
        Command::Cluster { variant } => variants(*variant)
            .into_iter()
            .map(|v| stages::cluster(&cfg, v, dir))
            .collect::<Result<_>>()?,
        Command::Evaluate { variant } => variants(*variant)
            .into_iter()
            .map(|v| stages::evaluate(&cfg, v, dir))
            .collect::<Result<_>>()?,
        Command::Report => vec![stages::report(dir)?],
        Command::Gradcheck { variant } => vec![stages::gradcheck(&cfg, *variant, dir)?.0],
        Command::Pipeline => stages::pipeline(&cfg, dir)?,
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summaries) => {
            for s in &summaries {
                println!("{s}");
                if let Some(n) = &s.notice {
                    println!("{}: {n}", s.stage);
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            match e.category() {
                "config" => 2,
                "stage" => 3,
                _ => 1,
            }
        }
    }
}
