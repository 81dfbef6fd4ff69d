//! `crowdnav`: dataset generation, training, evaluation and export.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{PlannerKind, PolicyMode};

#[derive(Debug, Parser)]
#[command(name = "crowdnav", version, about = "Crowd navigation with a learned follow-point policy over MPC")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out_dir` and $CROWDNAV_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset (synthetic or loaded), segment it and sample evaluation episodes.
    GenData {
        /// Recorded `frame_id ped_id x y` file instead of synthetic data.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Frame ids per second of `--input`.
        #[arg(long)]
        frame_rate: Option<f64>,
        /// Number of evaluation episodes in the manifest.
        #[arg(long)]
        episodes: Option<usize>,
        /// Setting written into the sampled episodes (online or offline).
        #[arg(long)]
        setting: Option<crowdnav::data::Setting>,
    },
    /// Train the follow-point policy; writes a checkpoint and a learning curve.
    Train {
        /// Directory written by gen-data (defaults to the output directory).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Crowd-following weight preset.
        #[arg(long, value_parser = ["0", "1", "5"])]
        lambda_f: Option<String>,
        /// Number of environment transitions (macro-steps).
        #[arg(long)]
        transitions: Option<usize>,
        /// Episode setting used for training.
        #[arg(long)]
        setting: Option<crowdnav::data::Setting>,
    },
    /// Evaluate a planner on the episode manifest; writes metrics and traces.
    Eval {
        /// Directory written by gen-data (defaults to the output directory).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Planner to evaluate.
        #[arg(long, value_enum)]
        planner: Option<PlannerKind>,
        /// Policy checkpoint (hicrowd only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Episode manifest (defaults to <data>/episodes.txt).
        #[arg(long)]
        episodes: Option<PathBuf>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Action selection of the learned policy.
        #[arg(long, value_enum)]
        mode: Option<PolicyMode>,
    },
    /// Render an episode trace as SVG, or re-emit it as canonical trace text.
    Export {
        /// Trace file written by eval.
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Svg)]
        format: ExportFormat,
        /// Output file (defaults to the trace path with the format's extension).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Svg,
    Trace,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Runtime(e) => e,
        }
    }
}

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn command() -> clap::Command {
    let table = config::key_table();
    let mut cmd = Cli::command().after_help(table.clone());
    for name in ["gen-data", "train", "eval", "export"] {
        let t = table.clone();
        cmd = cmd.mut_subcommand(name, |s| s.after_help(t));
    }
    cmd
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
