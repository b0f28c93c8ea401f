//! Command-line flags. Each command's flag struct doubles as its section in
//! a `--config` TOML file, so the resolved configuration printed before a
//! run can be fed back unchanged.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tlnas::datasets::Split;
use tlnas::harness::{Normalization, ScoreKind};
use tlnas::nn::BatchNormMode;

#[derive(Debug, Parser)]
#[command(name = "tlnas", version, about = "Trainless architecture scoring by untrained-accuracy variation")]
pub struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with `[score]`, `[search]`, `[study]` or `[baseline]`
    /// sections. Command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Untrained-accuracy statistics of one architecture, as JSON.
    Score(ScoreArgs),
    /// Score-and-select runs against a benchmark fixture.
    Search(SearchArgs),
    /// Train MLPs on reduced MNIST and relate CV_U to trained accuracy.
    Study(StudyArgs),
    /// Random or best-validation selection from the fixture alone.
    Baseline(BaselineArgs),
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err("expected train, val or test".into()),
    }
}

fn parse_score(s: &str) -> Result<ScoreKind, String> {
    s.parse().map_err(|e: tlnas::Error| e.to_string())
}

fn parse_batch_norm(s: &str) -> Result<BatchNormMode, String> {
    match s {
        "batch_statistics" | "batch-statistics" => Ok(BatchNormMode::BatchStatistics),
        "initial_running_statistics" | "initial-running-statistics" => Ok(BatchNormMode::InitialRunningStatistics),
        _ => Err("expected batch_statistics or initial_running_statistics".into()),
    }
}

fn parse_normalization(s: &str) -> Result<Normalization, String> {
    match s {
        "standardize" => Ok(Normalization::Standardize),
        "unit_scale" | "unit-scale" => Ok(Normalization::UnitScale),
        _ => Err("expected standardize or unit_scale".into()),
    }
}

fn parse_skeleton(s: &str) -> Result<String, String> {
    match s {
        "canonical" | "desk" => Ok(s.into()),
        _ => Err("expected canonical or desk".into()),
    }
}

/// Cell-network options shared by `score` and `search`.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetArgs {
    /// Skeleton preset: canonical (16 channels, 5 cells) or desk (8, 2).
    #[arg(long, value_parser = parse_skeleton)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<String>,
    /// Stem width; overrides the preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem_channels: Option<usize>,
    /// Cells per stack; overrides the preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_per_stack: Option<usize>,
    /// batch_statistics or initial_running_statistics.
    #[arg(long, value_parser = parse_batch_norm)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_norm: Option<BatchNormMode>,
    /// standardize or unit_scale.
    #[arg(long, value_parser = parse_normalization)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreArgs {
    /// Cell architecture string.
    #[arg(long, conflicts_with = "mlp")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arch: Option<String>,
    /// MLP hidden widths `W1,W2`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp: Option<String>,
    /// Dataset directory or TLNAS1 file (default: $TLNAS_DATA_DIR/<dataset>).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Dataset name used to find data under $TLNAS_DATA_DIR.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Split the batch is drawn from.
    #[arg(long, value_parser = parse_split)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Also report the Jacobian score of the first initialisation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mellor: Option<bool>,
    #[command(flatten)]
    #[serde(default)]
    pub net: NetArgs,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchArgs {
    /// Fixture dataset key: cifar10, cifar100 or ImageNet16-120.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Dataset directory or TLNAS1 file (default: $TLNAS_DATA_DIR/<dataset>).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Benchmark fixture (default: $TLNAS_DATA_DIR/nasbench201.jsonl).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// cv or mellor.
    #[arg(long, value_parser = parse_score)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory for runs.jsonl and summary.csv.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Also run both baselines with the same seeds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_baselines: Option<bool>,
    #[command(flatten)]
    #[serde(default)]
    pub net: NetArgs,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArgs {
    /// MNIST IDX directory (default: $TLNAS_DATA_DIR/mnist).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mnist: Option<PathBuf>,
    /// `desk`, `full`, or `W1,W2;W1,W2;...`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub archs: Option<String>,
    /// Training seeds per architecture and learning rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Comma-separated learning rates.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lrs: Option<Vec<f64>>,
    /// Master seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Training epochs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Minibatch size for training.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Epochs excluded from best-validation selection.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Training images kept per class.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    /// Split on which untrained accuracy is measured.
    #[arg(long, value_parser = parse_split)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub untrained_split: Option<Split>,
    /// standardize or unit_scale.
    #[arg(long, value_parser = parse_normalization)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    /// Output directory for study.jsonl, study_analysis.json and study_scatter.svg.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineArgs {
    /// random or optimal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory for the run records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Field-wise `self.or(other)`.
pub trait Merge {
    fn merge(self, other: Self) -> Self;
}

macro_rules! impl_merge {
    ($t:ty { $($f:ident),* } $(, $nested:ident)?) => {
        impl Merge for $t {
            fn merge(self, other: Self) -> Self {
                Self {
                    $($f: self.$f.or(other.$f),)*
                    $($nested: self.$nested.merge(other.$nested),)?
                }
            }
        }
    };
}

impl_merge!(NetArgs { skeleton, stem_channels, cells_per_stack, batch_norm, normalization });
impl_merge!(ScoreArgs { arch, mlp, data, dataset, n_init, batch_size, seed, split, mellor }, net);
impl_merge!(SearchArgs { dataset, data, fixture, n_runs, n_a, n_init, batch_size, score, seed, out, with_baselines }, net);
impl_merge!(StudyArgs { mnist, archs, seeds, lrs, seed, epochs, batch_size, burn_in, per_class, untrained_split, normalization, out });
impl_merge!(BaselineArgs { kind, fixture, dataset, n_runs, n_a, seed, out });
