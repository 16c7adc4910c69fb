//! U-Score: accuracy and efficiency (parameters, FLOPs, FPS) normalized
//! against 10th/90th percentile bands and combined by harmonic means.

mod bands;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bands::{score_registry, BandSource, BandTable, ScoreRow, ScoreTable, GLOBAL_KEY};
pub use table::{
    build_leaderboard, family_aggregate, year_trend, year_trend_csv, Leaderboard,
    LeaderboardEntry, MetricTable, YearBest,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UScoreError {
    #[error("quantile of an empty list")]
    EmptyInput,
    #[error("quantile level {0} outside [0, 1]")]
    BadLevel(f64),
    #[error("{metric} value must be positive for log normalization, got {value}")]
    NonPositive { metric: Metric, value: f64 },
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("weights and components differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid band for {metric}/{scope_key}: q10={q10}, q90={q90}")]
    InvalidBand {
        metric: Metric,
        scope_key: String,
        q10: f64,
        q90: f64,
    },
    #[error("no {metric} band for `{scope_key}`")]
    MissingBand { metric: Metric, scope_key: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("no records for scope {0}")]
    NoRecords(String),
    #[error("table parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = UScoreError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Iou,
    Params,
    Flops,
    Fps,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Iou, Metric::Params, Metric::Flops, Metric::Fps];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Iou => "iou",
            Metric::Params => "params",
            Metric::Flops => "flops",
            Metric::Fps => "fps",
        }
    }

    /// Lower is better for parameters and FLOPs.
    pub fn is_cost(self) -> bool {
        matches!(self, Metric::Params | Metric::Flops)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = UScoreError;

    fn from_str(s: &str) -> Result<Metric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iou" => Ok(Metric::Iou),
            "params" => Ok(Metric::Params),
            "flops" => Ok(Metric::Flops),
            "fps" => Ok(Metric::Fps),
            other => Err(UScoreError::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// Linear-interpolation quantile at position `(n − 1)·q` of the sorted list.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(UScoreError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(UScoreError::BadLevel(q));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileBand {
    pub metric: Metric,
    /// Dataset or transfer unit for accuracy bands, `global` otherwise.
    pub scope_key: String,
    pub q10: f64,
    pub q90: f64,
}

impl QuantileBand {
    pub fn new(metric: Metric, scope_key: impl Into<String>, q10: f64, q90: f64) -> Result<Self> {
        let band = QuantileBand {
            metric,
            scope_key: scope_key.into(),
            q10,
            q90,
        };
        band.validate()?;
        Ok(band)
    }

    /// Band from the 10th and 90th percentiles of `values`.
    pub fn from_values(metric: Metric, scope_key: impl Into<String>, values: &[f64]) -> Result<Self> {
        QuantileBand::new(metric, scope_key, quantile(values, 0.1)?, quantile(values, 0.9)?)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.q10.is_finite()
            && self.q90.is_finite()
            && self.q10 <= self.q90
            && (!self.metric.is_cost() || self.q10 > 0.0);
        if ok {
            Ok(())
        } else {
            Err(UScoreError::InvalidBand {
                metric: self.metric,
                scope_key: self.scope_key.clone(),
                q10: self.q10,
                q90: self.q90,
            })
        }
    }

    /// Maps a raw value into `[0, 1]`: linear for benefit metrics, log-scaled
    /// and reversed for cost metrics. A collapsed band (`q10 == q90`) acts
    /// as a step at the band value.
    pub fn normalize(&self, x: f64) -> Result<f64> {
        if self.metric.is_cost() {
            if !(x > 0.0) {
                return Err(UScoreError::NonPositive {
                    metric: self.metric,
                    value: x,
                });
            }
            if self.q10 == self.q90 {
                return Ok(if x <= self.q10 { 1.0 } else { 0.0 });
            }
            let (l10, l90) = (self.q10.ln(), self.q90.ln());
            Ok(((l90 - x.ln()) / (l90 - l10)).clamp(0.0, 1.0))
        } else {
            if self.q10 == self.q90 {
                return Ok(if x >= self.q10 { 1.0 } else { 0.0 });
            }
            Ok(((x - self.q10) / (self.q90 - self.q10)).clamp(0.0, 1.0))
        }
    }
}

/// The four bands a single breakdown needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentBands {
    pub iou: QuantileBand,
    pub params: QuantileBand,
    pub flops: QuantileBand,
    pub fps: QuantileBand,
}

/// Raw inputs of one breakdown: accuracy in `[0, 1]`, parameters (M),
/// GFLOPs and FPS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub accuracy: f64,
    pub params: f64,
    pub flops: f64,
    pub fps: f64,
}

/// Normalized `(a, p, g, s)`.
pub fn normalize_components(raw: &RawMetrics, bands: &ComponentBands) -> Result<[f64; 4]> {
    Ok([
        bands.iou.normalize(raw.accuracy)?,
        bands.params.normalize(raw.params)?,
        bands.flops.normalize(raw.flops)?,
        bands.fps.normalize(raw.fps)?,
    ])
}

/// Weighted harmonic mean `Σw / Σ(w/x)`. A zero component with positive
/// weight gives exactly 0; zero-weight components are ignored.
pub fn harmonic_mean(components: &[f64], weights: &[f64]) -> Result<f64> {
    if components.len() != weights.len() {
        return Err(UScoreError::LengthMismatch(components.len(), weights.len()));
    }
    if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
        return Err(UScoreError::NegativeWeight(w));
    }
    let (mut wsum, mut denom) = (0.0, 0.0);
    for (&x, &w) in components.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        wsum += w;
        denom += w / x;
    }
    if wsum == 0.0 {
        return Ok(0.0);
    }
    Ok(wsum / denom)
}

/// Harmonic combination of accuracy and efficiency with weights
/// `(alpha, 1 − alpha)`.
pub fn u_score(a: f64, eff: f64, alpha: f64) -> Result<f64> {
    harmonic_mean(&[a, eff], &[alpha, 1.0 - alpha])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UScoreConfig {
    /// Weights of the parameter, FLOP and speed components.
    pub weights: [f64; 3],
    pub alpha: f64,
    /// Optional lower bound applied to every normalized component; only for
    /// sensitivity studies.
    pub floor: Option<f64>,
}

impl Default for UScoreConfig {
    fn default() -> Self {
        UScoreConfig {
            weights: [1.0 / 3.0; 3],
            alpha: 0.5,
            floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UScoreBreakdown {
    pub a: f64,
    pub p: f64,
    pub g: f64,
    pub s: f64,
    pub eff: f64,
    pub u: f64,
    pub weights: [f64; 3],
    pub alpha: f64,
}

impl UScoreBreakdown {
    pub fn compute(raw: &RawMetrics, bands: &ComponentBands, cfg: &UScoreConfig) -> Result<Self> {
        let mut c = normalize_components(raw, bands)?;
        if let Some(floor) = cfg.floor {
            for v in &mut c {
                *v = v.max(floor);
            }
        }
        let [a, p, g, s] = c;
        let eff = harmonic_mean(&[p, g, s], &cfg.weights)?;
        let u = u_score(a, eff, cfg.alpha)?;
        Ok(UScoreBreakdown {
            a,
            p,
            g,
            s,
            eff,
            u,
            weights: cfg.weights,
            alpha: cfg.alpha,
        })
    }
}
