//! `phagraph`: generate corpora, build graphs, train embeddings and
//! classifiers, score pairs and run the evaluation experiments.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use phagraph_core::error::ErrorKind;
use phagraph_core::eval::Method;
use phagraph_core::graph::EventFormat;
use phagraph_core::predictor::Combiner;

#[derive(Debug, Parser)]
#[command(name = "phagraph", version, about = "Installation-graph embeddings and link prediction")]
pub struct Cli {
    /// JSON run configuration
    #[arg(short = 'c', long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, default the current one
    #[arg(short = 'o', long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed, overrides the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, overrides the config
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Replace existing outputs
    #[arg(long, global = true)]
    pub overwrite: bool,
    /// Event file format for written events
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for EventFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => EventFormat::Csv,
            FormatArg::Jsonl => EventFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Comparison,
    Latency,
    Rolling,
    Runtime,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic event corpus and its ground truth
    Generate,
    /// Build the bipartite graph snapshot and its statistics
    BuildGraph {
        /// Event file; overrides `events.path`
        events: Option<PathBuf>,
        /// Skip the first line of a CSV event file
        #[arg(long)]
        header: bool,
    },
    /// Train an embedding and a classifier on a temporal split
    Train {
        events: Option<PathBuf>,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        combiner: Option<Combiner>,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
    },
    /// Score device,app pairs with trained artifacts
    Predict {
        /// Directory written by `train`
        artifacts: PathBuf,
        /// CSV of device,app pairs
        pairs: PathBuf,
    },
    /// Run an evaluation experiment
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        events: Option<PathBuf>,
        #[arg(long)]
        header: bool,
    },
    /// Show sampled walks connecting a device to an app
    Explain {
        artifacts: PathBuf,
        device: String,
        app: String,
        /// Print JSON instead of text
        #[arg(long)]
        json: bool,
        /// Number of walks to sample
        #[arg(long)]
        walks: Option<usize>,
    },
    /// Re-export artifacts as events, embeddings and PA scores
    Export { artifacts: PathBuf },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method `{s}`, expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Runtime => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}
