use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use ubench_core::advisor::{ComputeBin, SpeedBin, StorageBin};
use ubench_core::mask::{BoundaryLabel, ScaleLabel, ShapeLabel};
use ubench_core::registry::{Modality, Scope};
use ubench_core::{LabelKind, ReportFormat};

#[derive(Debug, Parser)]
#[command(
    name = "ubench",
    version,
    about = "Score, test and rank segmentation models from a benchmark registry",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate cards and evaluation records and write a canonical registry.
    Ingest(IngestArgs),
    /// Measure foreground scale, shape and boundary traits from masks.
    Characterize(CharacterizeArgs),
    /// Compute U-Score breakdowns for every record of a scope.
    Score(ScoreArgs),
    /// Paired t-tests of every model against a baseline.
    Significance(SignificanceArgs),
    /// Rank models by mean IoU or mean U-Score.
    Leaderboard(LeaderboardArgs),
    /// Fit the pairwise boosted-tree ranker.
    AdvisorTrain(TrainArgs),
    /// Evaluate a ranker on groups it was not trained on.
    AdvisorEval(EvalArgs),
    /// Recommend models for dataset traits under resource constraints.
    Advise(AdviseArgs),
    /// Serve the read-only JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding models.json, datasets.json and optional
    /// transfers.csv, records.csv, means.csv, traits.json.
    #[arg(long, value_name = "DIR")]
    pub from: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub models: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub datasets: Option<PathBuf>,
    /// Per-sample IoU table.
    #[arg(long, value_name = "PATH")]
    pub records: Option<PathBuf>,
    /// Mean IoU table.
    #[arg(long, value_name = "PATH")]
    pub means: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub transfers: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub traits: Option<PathBuf>,
    /// Registry directory to write.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// Directory of 8-bit grayscale PNG masks.
    #[arg(long, value_name = "DIR")]
    pub masks: PathBuf,
    /// Directory of grayscale PNG images, matched to masks by file name.
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Modality name; adds the advisor feature slots to the output.
    #[arg(long)]
    pub modality: Option<Modality>,
    /// Dataset name recorded in the output and, with --registry, the
    /// dataset whose traits are updated.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Registry directory whose traits.json receives the measured labels.
    #[arg(long, value_name = "DIR", requires = "dataset")]
    pub registry: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub ring_radius: usize,
    #[arg(long, default_value_t = 3)]
    pub band_width: usize,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    /// source (in-domain) or target (zero-shot).
    #[arg(long, default_value = "source")]
    pub scope: Scope,
    /// Quantile band override (metric,scope_key,q10,q90); recomputed from
    /// the registry when absent.
    #[arg(long, value_name = "PATH")]
    pub bands: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    #[arg(long, default_value = "U-Net")]
    pub baseline: String,
    #[arg(long, default_value = "source")]
    pub scope: Scope,
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum LeaderboardMetric {
    Iou,
    Uscore,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["table", "registry"])))]
pub struct LeaderboardArgs {
    #[arg(long, value_enum, default_value = "iou")]
    pub metric: LeaderboardMetric,
    /// Wide table `model,<unit>...,[Avg]` in percent.
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub registry: Option<PathBuf>,
    #[arg(long, default_value = "source")]
    pub scope: Scope,
    #[arg(long, value_name = "PATH", requires = "registry")]
    pub bands: Option<PathBuf>,
    /// Baseline for tier annotations (registry input only). Tiers are
    /// skipped when the default baseline is not registered.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write the best model per publication year (needs cards).
    #[arg(long, value_name = "PATH", requires = "registry")]
    pub year_trend: Option<PathBuf>,
    /// Also write per-family means (needs cards).
    #[arg(long, value_name = "PATH", requires = "registry")]
    pub families: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    /// Relevance source.
    #[arg(long, default_value = "uscore")]
    pub label: LabelKind,
    #[arg(long, value_name = "PATH")]
    pub bands: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub subsample: f64,
    /// Datasets withheld from training (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub holdout: Vec<String>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub ranker: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub bands: Option<PathBuf>,
    /// Cutoffs for NDCG (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "5,20")]
    pub k: Vec<usize>,
    /// Relevance at or above which an item counts as relevant for MAP.
    #[arg(long, default_value_t = ubench_core::advisor::DEFAULT_RELEVANT_AT)]
    pub relevant_at: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdviseArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub ranker: PathBuf,
    /// Query document with the same shape as the HTTP request body.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["modality", "scale", "shape", "boundary"])]
    pub query: Option<PathBuf>,
    #[arg(long)]
    pub modality: Option<Modality>,
    #[arg(long)]
    pub scale: Option<ScaleLabel>,
    #[arg(long)]
    pub shape: Option<ShapeLabel>,
    #[arg(long)]
    pub boundary: Option<BoundaryLabel>,
    /// Largest acceptable storage bin.
    #[arg(long)]
    pub storage: Option<StorageBin>,
    /// Largest acceptable compute bin.
    #[arg(long)]
    pub compute: Option<ComputeBin>,
    /// Slowest acceptable speed bin.
    #[arg(long)]
    pub speed: Option<SpeedBin>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub bands: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "DIR")]
    pub registry: PathBuf,
    /// Ranker file; repeat to serve one per label kind.
    #[arg(long, value_name = "PATH")]
    pub ranker: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub bands: Option<PathBuf>,
    /// Directory of wide leaderboard tables named `<metric>_<scope>.csv`
    /// (for example `iou_in_domain.csv`); preferred over registry-derived
    /// leaderboards when present.
    #[arg(long, value_name = "DIR")]
    pub tables: Option<PathBuf>,
    #[arg(long, default_value = "U-Net")]
    pub baseline: String,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}
