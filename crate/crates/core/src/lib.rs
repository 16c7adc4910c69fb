//! Scoring and model-selection toolkit for segmentation benchmarks.
//!
//! The crate is organised around an immutable [`registry::Snapshot`] of model
//! cards, dataset cards and evaluation records. Everything downstream is a pure
//! function of a snapshot:
//!
//! - [`uscore`] turns raw accuracy / parameter / FLOP / FPS figures into the
//!   composite U-Score and builds leaderboards,
//! - [`stats`] runs paired t-tests against a baseline model and classifies the
//!   result into significance tiers,
//! - [`mask`] characterises ground-truth masks (scale, shape, boundary blur),
//! - [`advisor`] trains a pairwise gradient-boosted ranker over model and
//!   dataset features and answers constrained recommendation queries,
//! - [`report`] renders leaderboards as CSV, JSON or Markdown.

pub mod advisor;
pub mod mask;
pub mod registry;
pub mod report;
pub mod stats;
pub mod uscore;

pub use advisor::{
    Advice, AdvisorError, FeatureVector, LabelKind, Query, RankEval, RankerModel, RankingGroup,
    TrainConfig,
};
pub use mask::{DatasetForegroundProfile, GrayImage, Mask, MaskError, SampleForeground};
pub use registry::{
    DatasetCard, EvaluationRecord, Family, ModelCard, Modality, Registry, RegistryError, Role,
    Scope, Snapshot, TransferPair,
};
pub use report::ReportFormat;
pub use stats::{SignificanceMatrix, SignificanceTier, StatsError, TTestResult, Tier};
pub use uscore::{
    BandSource, BandTable, LeaderboardEntry, MetricTable, QuantileBand, ScoreTable,
    UScoreBreakdown, UScoreConfig, UScoreError,
};
