//! Canonical data model for the benchmark: model cards, dataset cards,
//! evaluation records and the source → target transfer map.
//!
//! A [`Registry`] is built once (cards first, then transfers, then records)
//! and frozen into a [`Snapshot`]. Every ingestion step returns a new registry
//! and leaves the receiver untouched, so a failed step never leaves a
//! half-applied state behind.

mod ingest;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mask::{BoundaryLabel, ScaleLabel, ShapeLabel};

pub use ingest::{parse_dataset_cards, parse_model_cards, parse_traits, parse_transfer_pairs};
pub use store::Snapshot;

/// Tolerance used when a provided mean column is cross-checked against the
/// mean of the per-sample IoUs.
pub const MEAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{file}: parse error at line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("model `{model}`: `{field}` must be positive, got {value}")]
    NonPositive {
        model: String,
        field: &'static str,
        value: f64,
    },
    #[error("dataset `{0}`: class_count must be at least 1")]
    ClassCount(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("{model}/{dataset}: IoU {value} outside [0, 1]")]
    IouOutOfRange {
        model: String,
        dataset: String,
        value: f64,
    },
    #[error("{model}/{dataset}/{scope}: provided mean {provided} differs from sample mean {computed}")]
    MeanMismatch {
        model: String,
        dataset: String,
        scope: Scope,
        provided: f64,
        computed: f64,
    },
    #[error("role violation: {0}")]
    RoleViolation(String),
    #[error("duplicate transfer pair {0} -> {1}")]
    DuplicateTransfer(String, String),
    #[error("duplicate record for ({model}, {dataset}, {scope})")]
    DuplicateRecord {
        model: String,
        dataset: String,
        scope: Scope,
    },
    #[error("duplicate sample index {index} for ({model}, {dataset}, {scope})")]
    DuplicateSample {
        model: String,
        dataset: String,
        scope: Scope,
        index: usize,
    },
    #[error("zero-shot record `{0}` does not name a registered transfer pair")]
    NotATransfer(String),
    #[error("zero-shot target `{0}` has several sources; write the record as SOURCE->TARGET")]
    AmbiguousTarget(String),
    #[error("invalid {field}: `{value}`")]
    InvalidValue { field: &'static str, value: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = RegistryError> = std::result::Result<T, E>;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text $(, alias = $alias)*)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = RegistryError;

            fn from_str(s: &str) -> Result<Self> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case($text) $(|| t.eq_ignore_ascii_case($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(RegistryError::InvalidValue { field: $field, value: s.to_string() })
            }
        }
    };
}

string_enum!(
    /// Architecture family of a model.
    Family, "family" {
        Cnn => "CNN",
        Transformer => "Transformer",
        Mamba => "Mamba",
        Rwkv => "RWKV",
        Hybrid => "Hybrid",
    }
);

string_enum!(
    /// Imaging modality of a dataset.
    Modality, "modality" {
        Ultrasound => "Ultrasound",
        Dermoscopy => "Dermoscopy",
        Endoscopy => "Endoscopy",
        Fundus => "Fundus",
        Histopathology => "Histopathology",
        Nuclear => "Nuclear",
        XRay => "X-Ray" | "XRay" | "X-ray",
        Mri => "MRI",
        Ct => "CT",
        Oct => "OCT",
    }
);

string_enum!(
    /// Whether a dataset is used for training (source) or only for zero-shot
    /// evaluation (target).
    Role, "role" {
        Source => "source",
        Target => "target",
    }
);

string_enum!(
    /// Evaluation scope of a record.
    Scope, "scope" {
        InDomain => "in_domain" | "source" | "in-domain",
        ZeroShot => "zero_shot" | "target" | "zero-shot",
    }
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub name: String,
    pub family: Family,
    pub year: i32,
    pub venue: String,
    pub deep_supervision: bool,
    pub pretrained: bool,
    /// Parameters, millions.
    pub params_m: f64,
    /// GFLOPs at the reference input size.
    pub flops_g: f64,
    /// Frames per second.
    pub fps: f64,
}

impl ModelCard {
    fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("params_m", self.params_m),
            ("flops_g", self.flops_g),
            ("fps", self.fps),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RegistryError::NonPositive {
                    model: self.name.clone(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCard {
    pub name: String,
    pub modality: Modality,
    pub role: Role,
    /// Number of foreground classes.
    pub class_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransferPair {
    pub source: String,
    pub target: String,
}

impl TransferPair {
    /// `SOURCE->TARGET`, the key zero-shot records and bands are stored under.
    pub fn unit(&self) -> String {
        format!("{}->{}", self.source, self.target)
    }
}

/// One model evaluated on one dataset (or transfer pair) in one scope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model: String,
    /// Evaluated dataset; the target dataset for zero-shot records.
    pub dataset: String,
    /// Training dataset of a zero-shot record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub scope: Scope,
    /// Per-sample IoU in test-set order. Empty for mean-only records.
    pub sample_ious: Vec<f64>,
    pub mean_iou: f64,
}

impl EvaluationRecord {
    /// Evaluation unit: the dataset name, or `SOURCE->TARGET` for zero-shot.
    pub fn unit(&self) -> String {
        match &self.source {
            Some(src) => format!("{src}->{}", self.dataset),
            None => self.dataset.clone(),
        }
    }

    pub fn has_samples(&self) -> bool {
        !self.sample_ious.is_empty()
    }

    fn key(&self) -> (String, String, Scope) {
        (self.model.clone(), self.unit(), self.scope)
    }
}

/// Dataset-level foreground traits, either measured by the mask analysis or
/// asserted by hand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetTraits {
    pub dataset: String,
    pub scale: ScaleLabel,
    pub shape: ShapeLabel,
    pub boundary: BoundaryLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub models: Vec<ModelCard>,
    pub datasets: Vec<DatasetCard>,
    pub records: Vec<EvaluationRecord>,
    pub transfers: Vec<TransferPair>,
    #[serde(default)]
    pub traits: Vec<DatasetTraits>,
}

impl Registry {
    pub fn new(models: Vec<ModelCard>, datasets: Vec<DatasetCard>) -> Result<Self> {
        unique_names("model", models.iter().map(|m| m.name.as_str()))?;
        unique_names("dataset", datasets.iter().map(|d| d.name.as_str()))?;
        for m in &models {
            m.validate()?;
        }
        for d in &datasets {
            if d.class_count < 1 {
                return Err(RegistryError::ClassCount(d.name.clone()));
            }
        }
        Ok(Registry {
            models,
            datasets,
            ..Default::default()
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelCard> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn dataset(&self, name: &str) -> Option<&DatasetCard> {
        self.datasets.iter().find(|d| d.name == name)
    }

    pub fn traits_for(&self, dataset: &str) -> Option<&DatasetTraits> {
        self.traits.iter().find(|t| t.dataset == dataset)
    }

    pub fn records_in(&self, scope: Scope) -> impl Iterator<Item = &EvaluationRecord> {
        self.records.iter().filter(move |r| r.scope == scope)
    }

    pub fn record(&self, model: &str, unit: &str, scope: Scope) -> Option<&EvaluationRecord> {
        self.records
            .iter()
            .find(|r| r.scope == scope && r.model == model && r.unit() == unit)
    }

    /// Validates `(source, target)` pairs against the registered dataset cards.
    pub fn resolve_transfers(&self, pairs: &[(String, String)]) -> Result<Vec<TransferPair>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(pairs.len());
        for (source, target) in pairs {
            let src = self
                .dataset(source)
                .ok_or_else(|| RegistryError::UnknownDataset(source.clone()))?;
            let tgt = self
                .dataset(target)
                .ok_or_else(|| RegistryError::UnknownDataset(target.clone()))?;
            if source == target {
                return Err(RegistryError::RoleViolation(format!(
                    "`{source}` cannot transfer to itself"
                )));
            }
            if src.role != Role::Source {
                return Err(RegistryError::RoleViolation(format!(
                    "`{source}` is a {} dataset and cannot be a transfer source",
                    src.role
                )));
            }
            if tgt.role != Role::Target {
                return Err(RegistryError::RoleViolation(format!(
                    "`{target}` is a {} dataset and cannot be a transfer target",
                    tgt.role
                )));
            }
            if !seen.insert((source.clone(), target.clone())) {
                return Err(RegistryError::DuplicateTransfer(
                    source.clone(),
                    target.clone(),
                ));
            }
            out.push(TransferPair {
                source: source.clone(),
                target: target.clone(),
            });
        }
        Ok(out)
    }

    /// Returns a copy of the registry with the given transfer pairs attached.
    pub fn with_transfers(&self, pairs: &[(String, String)]) -> Result<Registry> {
        let mut all: Vec<(String, String)> = self
            .transfers
            .iter()
            .map(|t| (t.source.clone(), t.target.clone()))
            .collect();
        all.extend(pairs.iter().cloned());
        let transfers = self.resolve_transfers(&all)?;
        Ok(Registry {
            transfers,
            ..self.clone()
        })
    }

    /// Returns a copy of the registry with dataset traits attached. Later
    /// entries for the same dataset replace earlier ones.
    pub fn with_traits(&self, traits: Vec<DatasetTraits>) -> Result<Registry> {
        let mut by_name: BTreeMap<String, DatasetTraits> = self
            .traits
            .iter()
            .map(|t| (t.dataset.clone(), t.clone()))
            .collect();
        for t in traits {
            if self.dataset(&t.dataset).is_none() {
                return Err(RegistryError::UnknownDataset(t.dataset));
            }
            by_name.insert(t.dataset.clone(), t);
        }
        Ok(Registry {
            traits: by_name.into_values().collect(),
            ..self.clone()
        })
    }

    /// Parses a per-sample records table and an optional means table and
    /// returns a registry with the resulting records attached.
    ///
    /// Records that appear only in the means table become mean-only records
    /// (no sample vector). Either every row is accepted or none is.
    pub fn ingest_records(
        &self,
        samples_csv: Option<&[u8]>,
        means_csv: Option<&[u8]>,
    ) -> Result<Registry> {
        let sample_rows = match samples_csv {
            Some(bytes) => ingest::parse_sample_rows(bytes)?,
            None => Vec::new(),
        };
        let mean_rows = match means_csv {
            Some(bytes) => ingest::parse_mean_rows(bytes)?,
            None => Vec::new(),
        };

        // (model, unit, scope) -> (dataset, source, index -> iou)
        type Group = (String, Option<String>, BTreeMap<usize, f64>);
        let mut groups: BTreeMap<(String, String, Scope), Group> = BTreeMap::new();
        for row in sample_rows {
            let (dataset, source) = self.resolve_unit(&row.model, &row.dataset, row.scope)?;
            check_iou(&row.model, &row.dataset, row.iou)?;
            let unit = unit_name(&dataset, source.as_deref());
            let entry = groups
                .entry((row.model.clone(), unit.clone(), row.scope))
                .or_insert_with(|| (dataset, source, BTreeMap::new()));
            if entry.2.insert(row.sample_index, row.iou).is_some() {
                return Err(RegistryError::DuplicateSample {
                    model: row.model,
                    dataset: unit,
                    scope: row.scope,
                    index: row.sample_index,
                });
            }
        }

        let mut provided: BTreeMap<(String, String, Scope), (String, Option<String>, f64)> =
            BTreeMap::new();
        for row in mean_rows {
            let (dataset, source) = self.resolve_unit(&row.model, &row.dataset, row.scope)?;
            check_iou(&row.model, &row.dataset, row.mean_iou)?;
            let unit = unit_name(&dataset, source.as_deref());
            let key = (row.model.clone(), unit.clone(), row.scope);
            if provided
                .insert(key, (dataset, source, row.mean_iou))
                .is_some()
            {
                return Err(RegistryError::DuplicateRecord {
                    model: row.model,
                    dataset: unit,
                    scope: row.scope,
                });
            }
        }

        let mut new_records = Vec::new();
        for ((model, unit, scope), (dataset, source, samples)) in groups {
            let sample_ious: Vec<f64> = samples.into_values().collect();
            let computed = mean(&sample_ious);
            if let Some((_, _, given)) = provided.remove(&(model.clone(), unit.clone(), scope)) {
                if (given - computed).abs() > MEAN_TOLERANCE {
                    return Err(RegistryError::MeanMismatch {
                        model,
                        dataset: unit,
                        scope,
                        provided: given,
                        computed,
                    });
                }
            }
            new_records.push(EvaluationRecord {
                model,
                dataset,
                source,
                scope,
                sample_ious,
                mean_iou: computed,
            });
        }
        for ((model, _, scope), (dataset, source, given)) in provided {
            new_records.push(EvaluationRecord {
                model,
                dataset,
                source,
                scope,
                sample_ious: Vec::new(),
                mean_iou: given,
            });
        }

        let mut keys: BTreeSet<(String, String, Scope)> =
            self.records.iter().map(EvaluationRecord::key).collect();
        for r in &new_records {
            if !keys.insert(r.key()) {
                return Err(RegistryError::DuplicateRecord {
                    model: r.model.clone(),
                    dataset: r.unit(),
                    scope: r.scope,
                });
            }
        }

        let mut records = self.records.clone();
        records.extend(new_records);
        Ok(Registry {
            records,
            ..self.clone()
        })
    }

    /// Maps a record's dataset column to `(dataset, source)`, checking that
    /// the model and dataset are registered and that zero-shot records name
    /// a transfer pair.
    fn resolve_unit(
        &self,
        model: &str,
        dataset: &str,
        scope: Scope,
    ) -> Result<(String, Option<String>)> {
        if self.model(model).is_none() {
            return Err(RegistryError::UnknownModel(model.to_string()));
        }
        match scope {
            Scope::InDomain => {
                if self.dataset(dataset).is_none() {
                    return Err(RegistryError::UnknownDataset(dataset.to_string()));
                }
                Ok((dataset.to_string(), None))
            }
            Scope::ZeroShot => {
                if let Some((src, tgt)) = split_unit(dataset) {
                    for name in [src, tgt] {
                        if self.dataset(name).is_none() {
                            return Err(RegistryError::UnknownDataset(name.to_string()));
                        }
                    }
                    if !self
                        .transfers
                        .iter()
                        .any(|t| t.source == src && t.target == tgt)
                    {
                        return Err(RegistryError::NotATransfer(dataset.to_string()));
                    }
                    return Ok((tgt.to_string(), Some(src.to_string())));
                }
                if self.dataset(dataset).is_none() {
                    return Err(RegistryError::UnknownDataset(dataset.to_string()));
                }
                let sources: Vec<&TransferPair> = self
                    .transfers
                    .iter()
                    .filter(|t| t.target == dataset)
                    .collect();
                match sources.as_slice() {
                    [] => Err(RegistryError::NotATransfer(dataset.to_string())),
                    [only] => Ok((dataset.to_string(), Some(only.source.clone()))),
                    _ => Err(RegistryError::AmbiguousTarget(dataset.to_string())),
                }
            }
        }
    }
}

/// Splits `SOURCE->TARGET` (or `SOURCE→TARGET`).
pub fn split_unit(unit: &str) -> Option<(&str, &str)> {
    unit.split_once("->")
        .or_else(|| unit.split_once('→'))
        .map(|(a, b)| (a.trim(), b.trim()))
}

fn unit_name(dataset: &str, source: Option<&str>) -> String {
    match source {
        Some(src) => format!("{src}->{dataset}"),
        None => dataset.to_string(),
    }
}

fn check_iou(model: &str, dataset: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RegistryError::IouOutOfRange {
            model: model.to_string(),
            dataset: dataset.to_string(),
            value,
        })
    }
}

fn unique_names<'a>(kind: &'static str, names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(RegistryError::DuplicateName {
                kind,
                name: n.to_string(),
            });
        }
    }
    Ok(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
