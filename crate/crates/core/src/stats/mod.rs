//! Paired t-tests against a baseline model and significance tiers.

pub mod special;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::registry::{Registry, Scope};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("degrees of freedom must be at least 1")]
    InvalidDf,
    #[error("paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown baseline model `{0}`")]
    UnknownBaseline(String),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

/// One-sided upper tail `P(T > t)` of Student's t with `df` degrees of
/// freedom.
pub fn student_t_sf(t: f64, df: u32) -> Result<f64> {
    if df < 1 {
        return Err(StatsError::InvalidDf);
    }
    if t.is_nan() {
        return Ok(f64::NAN);
    }
    let v = df as f64;
    let tail = |t: f64| -> f64 {
        if t.is_infinite() {
            return 0.0;
        }
        let t2 = t * t;
        0.5 * special::inc_beta_split(v / 2.0, 0.5, v / (v + t2), t2 / (v + t2))
    };
    Ok(if t >= 0.0 { tail(t) } else { 1.0 - tail(-t) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: u32,
    pub p_two_sided: f64,
    pub n: usize,
    pub mean_diff: f64,
    /// Set when the differences are constant and nonzero, so the statistic
    /// is infinite and `p` is its limit 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `x − y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = (n - 1) as u32;
    let (t_stat, p, degenerate) = if sd == 0.0 || sd <= 1e-12 * mean.abs() {
        if mean == 0.0 {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY.copysign(mean), 0.0, true)
        }
    } else {
        let t = mean * nf.sqrt() / sd;
        (t, (2.0 * student_t_sf(t.abs(), df)?).min(1.0), false)
    };
    Ok(TTestResult {
        t_stat,
        df,
        p_two_sided: p,
        n,
        mean_diff: mean,
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "p<0.0001")]
    P0001,
    #[serde(rename = "p<0.001")]
    P001,
    #[serde(rename = "p<0.01")]
    P01,
    #[serde(rename = "p<0.05")]
    P05,
    #[serde(rename = "not_significant")]
    NotSignificant,
    #[serde(rename = "unavailable")]
    Unavailable,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::P0001 => "p<0.0001",
            Tier::P001 => "p<0.001",
            Tier::P01 => "p<0.01",
            Tier::P05 => "p<0.05",
            Tier::NotSignificant => "not_significant",
            Tier::Unavailable => "unavailable",
        }
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Tier::P0001 => "****",
            Tier::P001 => "***",
            Tier::P01 => "**",
            Tier::P05 => "*",
            Tier::NotSignificant => "ns",
            Tier::Unavailable => "n/a",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Improves,
    Degrades,
    Tie,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Improves => "improves",
            Direction::Degrades => "degrades",
            Direction::Tie => "tie",
        }
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Direction::Improves => "▲",
            Direction::Degrades => "▼",
            Direction::Tie => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignificanceTier {
    pub tier: Tier,
    pub direction: Direction,
}

impl SignificanceTier {
    /// Compact cell annotation such as `****▲` or `ns`.
    pub fn glyph(&self) -> String {
        match self.tier {
            Tier::NotSignificant | Tier::Unavailable => self.tier.glyph().to_string(),
            t => format!("{}{}", t.glyph(), self.direction.glyph()),
        }
    }
}

/// Strict upper thresholds of the four significant tiers, tightest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierLegend {
    pub thresholds: [f64; 4],
}

impl Default for TierLegend {
    fn default() -> Self {
        TierLegend {
            thresholds: [1e-4, 1e-3, 1e-2, 5e-2],
        }
    }
}

impl TierLegend {
    pub fn tier(&self, p: f64) -> Tier {
        const TIERS: [Tier; 4] = [Tier::P0001, Tier::P001, Tier::P01, Tier::P05];
        for (th, tier) in self.thresholds.iter().zip(TIERS) {
            if p < *th {
                return tier;
            }
        }
        if p.is_nan() {
            Tier::Unavailable
        } else {
            Tier::NotSignificant
        }
    }
}

fn direction(variant_mean: f64, baseline_mean: f64) -> Direction {
    if variant_mean > baseline_mean {
        Direction::Improves
    } else if variant_mean < baseline_mean {
        Direction::Degrades
    } else {
        Direction::Tie
    }
}

pub fn classify(p: f64, variant_mean: f64, baseline_mean: f64) -> SignificanceTier {
    classify_with(&TierLegend::default(), p, variant_mean, baseline_mean)
}

pub fn classify_with(
    legend: &TierLegend,
    p: f64,
    variant_mean: f64,
    baseline_mean: f64,
) -> SignificanceTier {
    SignificanceTier {
        tier: legend.tier(p),
        direction: direction(variant_mean, baseline_mean),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub model: String,
    /// Evaluation unit (dataset, or `SOURCE->TARGET` for zero-shot).
    pub dataset: String,
    pub significance: SignificanceTier,
    pub test: Option<TTestResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub baseline: String,
    pub scope: Scope,
    pub cells: Vec<MatrixCell>,
}

impl SignificanceMatrix {
    pub fn get(&self, model: &str, dataset: &str) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.dataset == dataset)
    }

    /// `model → dataset → tier`, for joining into leaderboards.
    pub fn by_model(&self) -> BTreeMap<String, BTreeMap<String, SignificanceTier>> {
        let mut out: BTreeMap<String, BTreeMap<String, SignificanceTier>> = BTreeMap::new();
        for c in &self.cells {
            out.entry(c.model.clone())
                .or_default()
                .insert(c.dataset.clone(), c.significance);
        }
        out
    }

    /// CSV with header `model,dataset,scope,t,df,p,tier,direction`.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "dataset", "scope", "t", "df", "p", "tier", "direction"])
            .expect("in-memory write");
        for c in &self.cells {
            let (t, df, p) = match &c.test {
                Some(r) => (r.t_stat.to_string(), r.df.to_string(), r.p_two_sided.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                c.model.as_str(),
                c.dataset.as_str(),
                self.scope.as_str(),
                &t,
                &df,
                &p,
                c.significance.tier.as_str(),
                c.significance.direction.as_str(),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("flush")
    }
}

/// Tests every other model against `baseline` on each unit both evaluated
/// in `scope`. Cells without aligned sample vectors are `unavailable`.
pub fn significance_matrix(
    registry: &Registry,
    baseline: &str,
    scope: Scope,
    legend: &TierLegend,
) -> Result<SignificanceMatrix> {
    if registry.model(baseline).is_none() {
        return Err(StatsError::UnknownBaseline(baseline.to_string()));
    }
    let base: BTreeMap<String, &crate::registry::EvaluationRecord> = registry
        .records_in(scope)
        .filter(|r| r.model == baseline)
        .map(|r| (r.unit(), r))
        .collect();
    let mut pairs: Vec<_> = registry
        .records_in(scope)
        .filter(|r| r.model != baseline)
        .filter_map(|r| base.get(&r.unit()).map(|b| (r, *b)))
        .collect();
    pairs.sort_by(|a, b| (&a.0.model, a.0.unit()).cmp(&(&b.0.model, b.0.unit())));

    let cells = pairs
        .par_iter()
        .map(|(v, b)| {
            let test = if v.has_samples() && v.sample_ious.len() == b.sample_ious.len() {
                paired_t_test(&v.sample_ious, &b.sample_ious).ok()
            } else {
                None
            };
            let significance = match &test {
                Some(t) => classify_with(legend, t.p_two_sided, v.mean_iou, b.mean_iou),
                None => SignificanceTier {
                    tier: Tier::Unavailable,
                    direction: direction(v.mean_iou, b.mean_iou),
                },
            };
            MatrixCell {
                model: v.model.clone(),
                dataset: v.unit(),
                significance,
                test,
            }
        })
        .collect();
    Ok(SignificanceMatrix {
        baseline: baseline.to_string(),
        scope,
        cells,
    })
}
