//! Model advisor: dataset and model features, within-dataset relevance
//! labels, a pairwise boosted-tree ranker, ranking metrics and
//! constraint-filtered recommendations.

mod features;
mod gbdt;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mask::{BoundaryLabel, ScaleLabel, ShapeLabel};
use crate::registry::{Family, Modality, Registry, Role, Scope};
use crate::uscore::ScoreTable;

pub use features::{
    discretize_dataset, discretize_model, ComputeBin, DatasetFeatures, FeatureVector, ModelBins,
    SpeedBin, StorageBin,
};
pub use gbdt::{predict, train_ranker, Node, RankerModel, TrainConfig};
pub use metrics::{
    average_precision, evaluate, evaluate_with, mean_average_precision, mid_ranks, ndcg_at_k,
    presented_order, spearman, RankEval, DEFAULT_RELEVANT_AT,
};

#[derive(Debug, thiserror::Error)]
pub enum AdvisorError {
    #[error("invalid {field}: `{value}`")]
    InvalidValue { field: &'static str, value: String },
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no orderable pairs in the training groups")]
    NoPairs,
    #[error("no ranking groups")]
    NoGroups,
    #[error("held-out group `{0}` was used for training")]
    Overlap(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("source dataset `{0}` has no traits; characterize it or assert its traits")]
    MissingTraits(String),
    #[error("no U-Scores available for relevance labels")]
    MissingScores,
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("ranker parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = AdvisorError> = std::result::Result<T, E>;

/// Which per-dataset metric the relevance labels come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Iou,
    Uscore,
}

impl LabelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Iou => "iou",
            LabelKind::Uscore => "uscore",
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelKind {
    type Err = AdvisorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iou" => Ok(LabelKind::Iou),
            "uscore" | "u-score" => Ok(LabelKind::Uscore),
            _ => Err(AdvisorError::InvalidValue {
                field: "label_kind",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupItem {
    pub model: String,
    pub features: FeatureVector,
    pub relevance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingGroup {
    pub dataset: String,
    pub items: Vec<GroupItem>,
}

/// Min-max normalizes values within a group; an all-equal group maps to 0.5.
pub fn relevance_labels(values: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let lo = values.values().copied().fold(f64::INFINITY, f64::min);
    let hi = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|(k, &v)| {
            let r = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            (k.clone(), r)
        })
        .collect()
}

/// One ranking group per source dataset with in-domain records. Relevance
/// comes from mean IoU or from the in-domain U-Score table.
pub fn build_groups(
    registry: &Registry,
    kind: LabelKind,
    scores: Option<&ScoreTable>,
) -> Result<Vec<RankingGroup>> {
    let mut per_dataset: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    match kind {
        LabelKind::Iou => {
            for r in registry.records_in(Scope::InDomain) {
                per_dataset
                    .entry(r.dataset.clone())
                    .or_default()
                    .insert(r.model.clone(), r.mean_iou);
            }
        }
        LabelKind::Uscore => {
            let scores = scores.ok_or(AdvisorError::MissingScores)?;
            for r in scores.rows.iter().filter(|_| scores.scope == Scope::InDomain) {
                per_dataset
                    .entry(r.dataset.clone())
                    .or_default()
                    .insert(r.model.clone(), r.breakdown.u);
            }
        }
    }
    let mut groups = Vec::new();
    for (dataset, values) in per_dataset {
        let card = registry
            .dataset(&dataset)
            .ok_or_else(|| AdvisorError::UnknownDataset(dataset.clone()))?;
        if card.role != Role::Source {
            continue;
        }
        let traits = registry
            .traits_for(&dataset)
            .ok_or_else(|| AdvisorError::MissingTraits(dataset.clone()))?;
        let ds = DatasetFeatures::from_traits(card.modality, traits);
        let labels = relevance_labels(&values);
        let mut items = Vec::with_capacity(labels.len());
        for (model, relevance) in labels {
            let Some(card) = registry.model(&model) else {
                continue;
            };
            items.push(GroupItem {
                features: FeatureVector::build(&ds, card)?,
                model,
                relevance,
            });
        }
        groups.push(RankingGroup { dataset, items });
    }
    if groups.is_empty() {
        return Err(AdvisorError::NoGroups);
    }
    Ok(groups)
}

/// Resource limits. Storage and compute are upper bounds; speed is a lower
/// bound (the slowest acceptable bin).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute: Option<ComputeBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedBin>,
}

impl Constraints {
    pub fn admits(&self, bins: &ModelBins) -> bool {
        self.storage.is_none_or(|c| bins.storage <= c)
            && self.compute.is_none_or(|c| bins.compute <= c)
            && self.speed.is_none_or(|c| bins.speed >= c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub modality: Modality,
    pub scale: ScaleLabel,
    pub shape: ShapeLabel,
    pub boundary: BoundaryLabel,
    #[serde(default)]
    pub constraints: Constraints,
    /// Maximum number of results; all survivors when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_label_kind")]
    pub label_kind: LabelKind,
}

fn default_label_kind() -> LabelKind {
    LabelKind::Uscore
}

/// Mean U-Score components of a model over the units it was scored on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UScoreSummary {
    pub a: f64,
    pub p: f64,
    pub g: f64,
    pub s: f64,
    pub eff: f64,
    pub u: f64,
    pub datasets: usize,
}

impl UScoreSummary {
    pub fn for_model(scores: &ScoreTable, model: &str) -> Option<UScoreSummary> {
        let rows: Vec<_> = scores.for_model(model).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&crate::uscore::UScoreBreakdown) -> f64| {
            rows.iter().map(|r| f(&r.breakdown)).sum::<f64>() / n
        };
        Some(UScoreSummary {
            a: mean(|b| b.a),
            p: mean(|b| b.p),
            g: mean(|b| b.g),
            s: mean(|b| b.s),
            eff: mean(|b| b.eff),
            u: mean(|b| b.u),
            datasets: rows.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdviceEntry {
    pub rank: usize,
    pub model: String,
    pub family: Family,
    pub score: f64,
    pub bins: ModelBins,
    pub params_m: f64,
    pub flops_g: f64,
    pub fps: f64,
    pub uscore: Option<UScoreSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub entries: Vec<AdviceEntry>,
    /// Candidates left after applying the constraints, before truncation.
    pub survivors: usize,
    /// Set when no model survives: the first constraint that empties the
    /// candidate set, such as `storage<=Tiny`.
    pub binding_constraint: Option<String>,
}

/// Ranks every registered model for the queried dataset traits, after
/// dropping models that violate a constraint. Ties in predicted score fall
/// back to mean U-Score, then name.
pub fn advise(
    registry: &Registry,
    ranker: &RankerModel,
    scores: Option<&ScoreTable>,
    query: &Query,
) -> Result<Advice> {
    if ranker.feature_schema != FeatureVector::schema() {
        return Err(AdvisorError::SchemaMismatch(
            "ranker schema differs from the current feature layout".into(),
        ));
    }
    let ds = DatasetFeatures {
        modality: query.modality,
        scale: query.scale,
        shape: query.shape,
        boundary: query.boundary,
    };
    let mut candidates = Vec::new();
    for card in &registry.models {
        let bins = discretize_model(card.params_m, card.flops_g, card.fps)?;
        candidates.push((card, bins));
    }

    let c = &query.constraints;
    let steps: [(Option<String>, Box<dyn Fn(&ModelBins) -> bool>); 3] = [
        (
            c.storage.map(|v| format!("storage<={v}")),
            Box::new(|b: &ModelBins| c.storage.is_none_or(|v| b.storage <= v)),
        ),
        (
            c.compute.map(|v| format!("compute<={v}")),
            Box::new(|b: &ModelBins| c.compute.is_none_or(|v| b.compute <= v)),
        ),
        (
            c.speed.map(|v| format!("speed>={v}")),
            Box::new(|b: &ModelBins| c.speed.is_none_or(|v| b.speed >= v)),
        ),
    ];
    let mut binding = None;
    for (label, keep) in &steps {
        let before = candidates.len();
        candidates.retain(|(_, b)| keep(b));
        if binding.is_none() && before > 0 && candidates.is_empty() {
            binding = label.clone();
        }
    }
    if candidates.is_empty() {
        return Ok(Advice {
            entries: Vec::new(),
            survivors: 0,
            binding_constraint: binding.or_else(|| Some("empty registry".into())),
        });
    }

    let mut entries: Vec<AdviceEntry> = Vec::with_capacity(candidates.len());
    for (card, bins) in candidates {
        let f = FeatureVector::build(&ds, card)?;
        let score = predict(ranker, std::slice::from_ref(&f))?[0];
        entries.push(AdviceEntry {
            rank: 0,
            model: card.name.clone(),
            family: card.family,
            score,
            bins,
            params_m: card.params_m,
            flops_g: card.flops_g,
            fps: card.fps,
            uscore: scores.and_then(|s| UScoreSummary::for_model(s, &card.name)),
        });
    }
    let u_of = |e: &AdviceEntry| e.uscore.as_ref().map_or(f64::NEG_INFINITY, |s| s.u);
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| u_of(b).total_cmp(&u_of(a)))
            .then_with(|| a.model.cmp(&b.model))
    });
    let survivors = entries.len();
    if let Some(k) = query.k.filter(|&k| k > 0) {
        entries.truncate(k);
    }
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(Advice {
        entries,
        survivors,
        binding_constraint: None,
    })
}
