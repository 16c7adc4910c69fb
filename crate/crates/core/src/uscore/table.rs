use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Result, ScoreTable, UScoreError};
use crate::registry::{Family, ModelCard, Registry, Scope};
use crate::stats::SignificanceTier;

/// A model × unit grid of values in `[0, 1]`, optionally carrying a reported
/// per-model mean (the `Avg` column of a published table).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric: String,
    /// Column order.
    pub units: Vec<String>,
    pub values: BTreeMap<String, BTreeMap<String, f64>>,
    pub reported_mean: BTreeMap<String, f64>,
}

impl MetricTable {
    /// Mean IoU of every record in `scope`.
    pub fn from_mean_ious(registry: &Registry, scope: Scope) -> MetricTable {
        let mut t = MetricTable {
            metric: "iou".into(),
            ..Default::default()
        };
        for r in registry.records_in(scope) {
            t.insert(&r.model, &r.unit(), r.mean_iou);
        }
        t.units.sort();
        t
    }

    /// The `u` column of a score table.
    pub fn from_scores(scores: &ScoreTable) -> MetricTable {
        let mut t = MetricTable {
            metric: "uscore".into(),
            ..Default::default()
        };
        for r in &scores.rows {
            t.insert(&r.model, &r.dataset, r.breakdown.u);
        }
        t.units.sort();
        t
    }

    /// Parses a wide table `model,<unit>...[,Avg]` with values in percent.
    pub fn from_wide_csv(metric: &str, bytes: &[u8]) -> Result<MetricTable> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
        let header = rdr
            .headers()
            .map_err(|e| UScoreError::Parse(e.to_string()))?
            .clone();
        if header.get(0) != Some("model") {
            return Err(UScoreError::Parse("first column must be `model`".into()));
        }
        let avg_col = header.iter().position(|h| h.eq_ignore_ascii_case("avg"));
        let mut t = MetricTable {
            metric: metric.to_string(),
            ..Default::default()
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| UScoreError::Parse(e.to_string()))?;
            let model = rec.get(0).unwrap_or_default().to_string();
            if t.values.contains_key(&model) {
                return Err(UScoreError::Parse(format!("duplicate model `{model}`")));
            }
            for (i, cell) in rec.iter().enumerate().skip(1) {
                if cell.is_empty() {
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    UScoreError::Parse(format!("{model}: bad number `{cell}`"))
                })?;
                if Some(i) == avg_col {
                    t.reported_mean.insert(model.clone(), v / 100.0);
                } else {
                    t.insert(&model, &header[i], v / 100.0);
                }
            }
        }
        Ok(t)
    }

    fn insert(&mut self, model: &str, unit: &str, value: f64) {
        if !self.units.iter().any(|u| u == unit) {
            self.units.push(unit.to_string());
        }
        self.values
            .entry(model.to_string())
            .or_default()
            .insert(unit.to_string(), value);
    }

    pub fn models(&self) -> impl Iterator<Item = &String> {
        self.values.keys()
    }

    /// Unweighted mean over the model's units.
    pub fn macro_mean(&self, model: &str) -> Option<f64> {
        let row = self.values.get(model)?;
        if row.is_empty() {
            return None;
        }
        Some(row.values().sum::<f64>() / row.len() as f64)
    }

    /// The reported mean when present, else the macro mean.
    pub fn mean(&self, model: &str) -> Option<f64> {
        self.reported_mean
            .get(model)
            .copied()
            .or_else(|| self.macro_mean(model))
    }

    /// Models whose reported mean differs from their macro mean by more
    /// than `tol`: `(model, reported, macro)`.
    pub fn avg_discrepancies(&self, tol: f64) -> Vec<(String, f64, f64)> {
        self.reported_mean
            .iter()
            .filter_map(|(m, &rep)| {
                let mac = self.macro_mean(m)?;
                ((rep - mac).abs() > tol).then(|| (m.clone(), rep, mac))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub model: String,
    /// Mean metric ×100.
    pub value: f64,
    /// Per-unit metric ×100.
    pub per_dataset: BTreeMap<String, f64>,
    /// Per-unit significance against the baseline, when tested.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tiers: BTreeMap<String, SignificanceTier>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub metric: String,
    pub units: Vec<String>,
    pub entries: Vec<LeaderboardEntry>,
}

/// Ranks models by mean value descending, ties broken by name ascending.
pub fn build_leaderboard(
    table: &MetricTable,
    tiers: Option<&BTreeMap<String, BTreeMap<String, SignificanceTier>>>,
) -> Leaderboard {
    let mut scored: Vec<(&String, f64)> = table
        .models()
        .filter_map(|m| table.mean(m).map(|v| (m, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(i, (model, value))| LeaderboardEntry {
            rank: i + 1,
            model: model.clone(),
            value: value * 100.0,
            per_dataset: table.values[model]
                .iter()
                .map(|(u, v)| (u.clone(), v * 100.0))
                .collect(),
            tiers: tiers
                .and_then(|t| t.get(model))
                .cloned()
                .unwrap_or_default(),
        })
        .collect();
    Leaderboard {
        metric: table.metric.clone(),
        units: table.units.clone(),
        entries,
    }
}

/// Mean per family: for each unit the unweighted mean over the family's
/// models, then the macro mean over units. Values ×100.
pub fn family_aggregate(table: &MetricTable, models: &[ModelCard]) -> BTreeMap<Family, f64> {
    let family: BTreeMap<&str, Family> = models.iter().map(|m| (m.name.as_str(), m.family)).collect();
    let mut per_unit: BTreeMap<Family, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for (model, row) in &table.values {
        let Some(&f) = family.get(model.as_str()) else {
            continue;
        };
        for (unit, &v) in row {
            let cell = per_unit.entry(f).or_default().entry(unit).or_insert((0.0, 0));
            cell.0 += v;
            cell.1 += 1;
        }
    }
    per_unit
        .into_iter()
        .map(|(f, units)| {
            let n = units.len() as f64;
            let sum: f64 = units.values().map(|(s, c)| s / *c as f64).sum();
            (f, 100.0 * sum / n)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearBest {
    pub year: i32,
    pub model: String,
    /// Mean metric ×100.
    pub value: f64,
}

/// Best model per publication year by mean value (ties by name).
pub fn year_trend(table: &MetricTable, models: &[ModelCard]) -> Vec<YearBest> {
    let mut best: BTreeMap<i32, YearBest> = BTreeMap::new();
    let mut names: Vec<&ModelCard> = models.iter().collect();
    names.sort_by(|a, b| a.name.cmp(&b.name));
    for m in names {
        let Some(v) = table.mean(&m.name) else {
            continue;
        };
        let v = v * 100.0;
        let replace = best.get(&m.year).is_none_or(|b| v > b.value);
        if replace {
            best.insert(
                m.year,
                YearBest {
                    year: m.year,
                    model: m.name.clone(),
                    value: v,
                },
            );
        }
    }
    best.into_values().collect()
}

pub fn year_trend_csv(rows: &[YearBest]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "model", "value"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.year.to_string(), r.model.clone(), format!("{:.2}", r.value)])
            .expect("in-memory write");
    }
    w.into_inner().expect("flush")
}
