use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ComponentBands, Metric, QuantileBand, RawMetrics, Result, UScoreBreakdown, UScoreConfig,
    UScoreError,
};
use crate::registry::{Registry, Scope};

/// Scope key of bands that apply to every dataset.
pub const GLOBAL_KEY: &str = "global";

/// Bands keyed by `(metric, scope_key)`. Lookups fall back to the `global`
/// band of the metric when no dataset-specific band exists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    bands: BTreeMap<(Metric, String), QuantileBand>,
}

#[derive(Deserialize)]
struct BandRow {
    metric: String,
    scope_key: String,
    q10: f64,
    q90: f64,
}

impl BandTable {
    pub fn from_bands(bands: impl IntoIterator<Item = QuantileBand>) -> Result<BandTable> {
        let mut t = BandTable::default();
        for b in bands {
            b.validate()?;
            t.bands.insert((b.metric, b.scope_key.clone()), b);
        }
        Ok(t)
    }

    /// Reads `metric,scope_key,q10,q90` rows.
    pub fn from_csv(bytes: &[u8]) -> Result<BandTable> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
        let mut bands = Vec::new();
        for row in rdr.deserialize::<BandRow>() {
            let row = row.map_err(|e| UScoreError::Parse(e.to_string()))?;
            bands.push(QuantileBand::new(
                row.metric.parse()?,
                row.scope_key,
                row.q10,
                row.q90,
            )?);
        }
        BandTable::from_bands(bands)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "scope_key", "q10", "q90"])
            .expect("in-memory write");
        for b in self.bands.values() {
            w.write_record([
                b.metric.as_str(),
                &b.scope_key,
                &b.q10.to_string(),
                &b.q90.to_string(),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("flush")
    }

    pub fn get(&self, metric: Metric, scope_key: &str) -> Option<&QuantileBand> {
        self.bands
            .get(&(metric, scope_key.to_string()))
            .or_else(|| self.bands.get(&(metric, GLOBAL_KEY.to_string())))
    }

    pub fn require(&self, metric: Metric, scope_key: &str) -> Result<&QuantileBand> {
        self.get(metric, scope_key)
            .ok_or_else(|| UScoreError::MissingBand {
                metric,
                scope_key: scope_key.to_string(),
            })
    }

    pub fn bands(&self) -> impl Iterator<Item = &QuantileBand> {
        self.bands.values()
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Accuracy bands per evaluation unit over the records of `scope`, and
    /// global efficiency bands over every registered model.
    pub fn recompute(registry: &Registry, scope: Scope) -> Result<BandTable> {
        let mut per_unit: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in registry.records_in(scope) {
            per_unit.entry(r.unit()).or_default().push(r.mean_iou);
        }
        let mut bands = Vec::new();
        for (unit, values) in per_unit {
            bands.push(QuantileBand::from_values(Metric::Iou, unit, &values)?);
        }
        if !registry.models.is_empty() {
            let col = |f: fn(&crate::registry::ModelCard) -> f64| -> Vec<f64> {
                registry.models.iter().map(f).collect()
            };
            bands.push(QuantileBand::from_values(Metric::Params, GLOBAL_KEY, &col(|m| m.params_m))?);
            bands.push(QuantileBand::from_values(Metric::Flops, GLOBAL_KEY, &col(|m| m.flops_g))?);
            bands.push(QuantileBand::from_values(Metric::Fps, GLOBAL_KEY, &col(|m| m.fps))?);
        }
        BandTable::from_bands(bands)
    }

    pub fn component_bands(&self, unit: &str) -> Result<ComponentBands> {
        Ok(ComponentBands {
            iou: self.require(Metric::Iou, unit)?.clone(),
            params: self.require(Metric::Params, unit)?.clone(),
            flops: self.require(Metric::Flops, unit)?.clone(),
            fps: self.require(Metric::Fps, unit)?.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BandSource {
    /// Percentiles recomputed from the registry being scored.
    Recomputed,
    /// A fixed band table, e.g. loaded from `bands.csv`.
    Override(BandTable),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub dataset: String,
    #[serde(flatten)]
    pub breakdown: UScoreBreakdown,
}

/// One breakdown per record of a scope, sorted by model then unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub scope: Scope,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn get(&self, model: &str, dataset: &str) -> Option<&UScoreBreakdown> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.dataset == dataset)
            .map(|r| &r.breakdown)
    }

    pub fn for_model<'a>(&'a self, model: &'a str) -> impl Iterator<Item = &'a ScoreRow> + 'a {
        self.rows.iter().filter(move |r| r.model == model)
    }

    /// CSV with header `model,dataset,scope,a,p,g,s,eff,u`.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "dataset", "scope", "a", "p", "g", "s", "eff", "u"])
            .expect("in-memory write");
        for r in &self.rows {
            let b = &r.breakdown;
            let nums = [b.a, b.p, b.g, b.s, b.eff, b.u].map(|v| v.to_string());
            let mut rec = vec![r.model.clone(), r.dataset.clone(), self.scope.to_string()];
            rec.extend(nums);
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("flush")
    }
}

/// Scores every record of `scope`.
pub fn score_registry(
    registry: &Registry,
    scope: Scope,
    source: &BandSource,
    cfg: &UScoreConfig,
) -> Result<ScoreTable> {
    let recomputed;
    let bands = match source {
        BandSource::Override(t) => t,
        BandSource::Recomputed => {
            recomputed = BandTable::recompute(registry, scope)?;
            &recomputed
        }
    };
    let mut records: Vec<_> = registry.records_in(scope).collect();
    records.sort_by(|a, b| (&a.model, a.unit()).cmp(&(&b.model, b.unit())));
    let rows = records
        .par_iter()
        .map(|r| {
            let card = registry
                .model(&r.model)
                .ok_or_else(|| UScoreError::UnknownModel(r.model.clone()))?;
            let unit = r.unit();
            let raw = RawMetrics {
                accuracy: r.mean_iou,
                params: card.params_m,
                flops: card.flops_g,
                fps: card.fps,
            };
            let breakdown = UScoreBreakdown::compute(&raw, &bands.component_bands(&unit)?, cfg)?;
            Ok(ScoreRow {
                model: r.model.clone(),
                dataset: unit,
                breakdown,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable { scope, rows })
}
