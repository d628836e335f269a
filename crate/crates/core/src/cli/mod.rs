// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! Each subcommand's parameters can also come from a JSON object passed via
//! `--config`; flags given on the command line take precedence, and unknown
//! keys are rejected.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use report::Report;

#[derive(Debug, Parser)]
#[command(
    name = "diffconcepts",
    version,
    about = "Concept extraction from activation differences"
)]
pub struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true, env = "DC_THREADS")]
    pub threads: Option<usize>,
    /// JSON file with parameters for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a concept dictionary by clustering activation differences.
    Extract(ExtractArgs),
    /// Project activations onto a dictionary.
    Score(ScoreArgs),
    /// Probe loss per attribute for one or more dictionaries.
    Probe(ProbeArgs),
    /// Consistency of extraction across seeds.
    Mppc(MppcArgs),
    /// Input-space, weighting and SAE ablation grid.
    Ablate(AblateArgs),
    /// Steer activations along concepts.
    Steer(SteerArgs),
    /// Train a TopK sparse autoencoder baseline.
    #[command(name = "sae-train")]
    SaeTrain(SaeTrainArgs),
    /// Supervised one-vs-rest LDA directions for an attribute.
    Lda(LdaArgs),
    /// Quadratic discriminant concepts.
    Quadratic(QuadraticArgs),
    /// Highest-scoring samples per concept.
    Topact(TopactArgs),
    /// Write a synthetic planted-concept dataset.
    Synth(SynthArgs),
}

/// Output rendering for report commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    /// Number of concepts [default: 6144].
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skewness floor for the weights [default: 0.001].
    #[arg(long = "skew-eps")]
    pub skew_eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cluster unoriented rows with unit weights.
    #[arg(long)]
    pub no_weighting: bool,
    /// Cluster the activations instead of their differences.
    #[arg(long)]
    pub on_activations: bool,
    /// Emit raw centroids instead of unit directions.
    #[arg(long)]
    pub no_normalize: bool,
    /// Estimate skewness on a random subset of this many samples.
    #[arg(long)]
    pub skew_sample: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    /// Dictionary directory.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Output `.npy` file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Dictionary directory (repeatable).
    #[arg(long)]
    pub dict: Vec<PathBuf>,
    /// SAE model directory scored by its codes (repeatable).
    #[arg(long)]
    pub sae: Vec<PathBuf>,
    /// Quadratic concept directory (repeatable).
    #[arg(long)]
    pub quadratic: Vec<PathBuf>,
    /// Attributes to probe [default: all in the label table].
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MppcArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    /// Compare two existing dictionaries instead of extracting (give twice).
    #[arg(long)]
    pub dict: Vec<PathBuf>,
    /// Extraction seeds; consecutive seeds form the compared pairs
    /// [default: seed, seed+1, ..., seed+pairs].
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seed pairs [default: 10].
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "skew-eps")]
    pub skew_eps: Option<f64>,
    /// Correlation threshold for the significance bound [default: 0.3].
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AblateArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "skew-eps")]
    pub skew_eps: Option<f64>,
    /// Leave out the TopK-SAE rows.
    #[arg(long)]
    pub no_sae: bool,
    #[arg(long)]
    pub k_active: Option<usize>,
    #[arg(long)]
    pub sae_lr: Option<f64>,
    #[arg(long)]
    pub sae_epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SteerArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// JSON list of `{concept_id, alpha | "zero", row_indices}`.
    #[arg(long)]
    pub requests: Option<PathBuf>,
    /// Output directory for `steered.npy` and the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report this many nearest original samples for each steered row.
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<crate::steering::Metric>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SaeTrainArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    /// Dictionary size [default: 6144].
    #[arg(long)]
    pub k: Option<usize>,
    /// Active codes per sample [default: 32].
    #[arg(long)]
    pub k_active: Option<usize>,
    /// Adam learning rate [default: 1e-5].
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LdaArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub attribute: Option<String>,
    /// Absolute variance ridge [default: 1e-4 of the mean class variance].
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Neighbourhood size including the anchor [default: 50].
    #[arg(long)]
    pub n_neighbors: Option<usize>,
    /// Relative ridge before inversion [default: 1e-6].
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long, value_enum)]
    pub center: Option<crate::quadratic::Center>,
    /// Permit dimensions above 256.
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TopactArgs {
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Samples per concept [default: 9].
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Planted,
    Skewed,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Concepts exposed as binary label attributes [default: 0,1,2,3].
    #[arg(long, value_delimiter = ',')]
    pub label_concepts: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlay command-line values on the config file: a flag wins unless it is
/// absent (`null`), an empty list or `false`.
fn overlay(cli: Value, config: Value) -> Value {
    match (cli, config) {
        (Value::Object(c), Value::Object(mut base)) => {
            for (k, v) in c {
                let unset = match &v {
                    Value::Null | Value::Bool(false) => true,
                    Value::Array(a) => a.is_empty(),
                    _ => false,
                };
                if !unset || !base.contains_key(&k) {
                    base.insert(k, v);
                }
            }
            Value::Object(base)
        }
        (cli, _) => cli,
    }
}

pub fn merge_config<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !file.is_object() {
        return Err(Error::Config(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    }
    // Validate the file on its own so unknown keys are reported against it.
    serde_json::from_value::<T>(file.clone())
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let merged = overlay(serde_json::to_value(cli)?, file);
    serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let cfg = cli.config.as_deref();
    let start = Instant::now();
    let name = match &cli.command {
        Command::Extract(a) => commands::extract(merge_config(a, cfg)?).map(|_| "extract"),
        Command::Score(a) => commands::score(merge_config(a, cfg)?).map(|_| "score"),
        Command::Probe(a) => commands::probe(merge_config(a, cfg)?).map(|_| "probe"),
        Command::Mppc(a) => commands::mppc(merge_config(a, cfg)?).map(|_| "mppc"),
        Command::Ablate(a) => commands::ablate(merge_config(a, cfg)?).map(|_| "ablate"),
        Command::Steer(a) => commands::steer(merge_config(a, cfg)?).map(|_| "steer"),
        Command::SaeTrain(a) => commands::sae_train(merge_config(a, cfg)?).map(|_| "sae-train"),
        Command::Lda(a) => commands::lda(merge_config(a, cfg)?).map(|_| "lda"),
        Command::Quadratic(a) => commands::quadratic(merge_config(a, cfg)?).map(|_| "quadratic"),
        Command::Topact(a) => commands::topact(merge_config(a, cfg)?).map(|_| "topact"),
        Command::Synth(a) => commands::synth(merge_config(a, cfg)?).map(|_| "synth"),
    }?;
    eprintln!("{name}: done in {:.3}s", start.elapsed().as_secs_f64());
    Ok(())
}

/// Parse arguments, run, and map the outcome to a process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}
