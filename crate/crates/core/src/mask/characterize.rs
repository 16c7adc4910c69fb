use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    boundary_ring, convex_hull_area, morph, perimeter, trace_contours, GrayImage, Mask, MaskError,
    MorphOp, Result,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeConfig {
    /// Radius of the boundary ring used for the boundary width.
    pub ring_radius: usize,
    /// Width of the inner and outer intensity bands used for CNR.
    pub band_width: usize,
    pub epsilon: f64,
    pub small_scale_below: f64,
    pub irregular_below: f64,
    pub blur_at_least: f64,
}

impl Default for CharacterizeConfig {
    fn default() -> Self {
        CharacterizeConfig {
            ring_radius: 1,
            band_width: 3,
            epsilon: 1e-6,
            small_scale_below: 0.05,
            irregular_below: 0.5,
            blur_at_least: 0.6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleLabel {
    Small,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeLabel {
    Irregular,
    Regular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryLabel {
    Clear,
    Blur,
}

macro_rules! label_from_str {
    ($t:ty, $($text:literal => $v:expr),+) => {
        impl std::str::FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($v),)+
                    other => Err(format!("unknown {} label `{other}`", stringify!($t))),
                }
            }
        }
    };
}

label_from_str!(ScaleLabel, "small" => ScaleLabel::Small, "large" => ScaleLabel::Large);
label_from_str!(ShapeLabel, "irregular" => ShapeLabel::Irregular, "regular" => ShapeLabel::Regular);
label_from_str!(BoundaryLabel, "clear" => BoundaryLabel::Clear, "blur" => BoundaryLabel::Blur);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeParts {
    pub perimeter: f64,
    pub circularity: f64,
    pub solidity: f64,
    pub convex_area: f64,
    /// Mean of circularity and solidity.
    pub shape_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParts {
    pub ring_area: usize,
    /// Ring area over perimeter.
    pub boundary_width: f64,
    pub cnr: f64,
    pub band_width: usize,
}

/// Foreground measurements of one mask. Shape and boundary parts are absent
/// when the foreground is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleForeground {
    pub area_ratio: f64,
    pub foreground_area: usize,
    pub shape: Option<ShapeParts>,
    pub boundary: Option<BoundaryParts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetForegroundProfile {
    pub samples: Vec<SampleForeground>,
    /// Per-sample normalized boundary width (`None` for empty samples).
    pub w_norm: Vec<Option<f64>>,
    pub c_norm: Vec<Option<f64>>,
    pub blur_score: Vec<Option<f64>>,
    pub median_area_ratio: f64,
    pub median_shape_score: f64,
    pub median_blur_score: f64,
    pub scale_label: ScaleLabel,
    pub shape_label: ShapeLabel,
    pub boundary_label: BoundaryLabel,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn band_values(band: &Mask, image: &GrayImage) -> Vec<f64> {
    band.labels()
        .iter()
        .zip(image.intensity())
        .filter(|(&b, _)| b != 0)
        .map(|(_, &v)| v)
        .collect()
}

/// Contrast-to-noise ratio between two intensity populations, using
/// population standard deviations. Zero when either band is empty.
pub(crate) fn cnr(inner: &[f64], outer: &[f64], eps: f64) -> f64 {
    if inner.is_empty() || outer.is_empty() {
        return 0.0;
    }
    let (mi, si) = mean_std(inner);
    let (mo, so) = mean_std(outer);
    (mi - mo).abs() / (si + so + eps)
}

pub fn characterize_sample(
    mask: &Mask,
    image: &GrayImage,
    cfg: &CharacterizeConfig,
) -> Result<SampleForeground> {
    if mask.width() != image.width() || mask.height() != image.height() {
        return Err(MaskError::DimensionMismatch(
            mask.width(),
            mask.height(),
            image.width(),
            image.height(),
        ));
    }
    let bin = mask.binary();
    let area_f = bin.count();
    let total = bin.width() * bin.height();
    let area_ratio = if total == 0 {
        0.0
    } else {
        area_f as f64 / total as f64
    };
    if area_f == 0 {
        return Ok(SampleForeground {
            area_ratio,
            foreground_area: 0,
            shape: None,
            boundary: None,
        });
    }

    let eps = cfg.epsilon;
    let p = perimeter(&trace_contours(&bin));
    let p_ratio = if p > 0.0 { p } else { eps };
    let circularity = 4.0 * std::f64::consts::PI * area_f as f64 / (p_ratio * p_ratio);
    let convex_area = convex_hull_area(&bin)?;
    let solidity = area_f as f64 / convex_area;

    let ring_area = boundary_ring(&bin, cfg.ring_radius)?.count();
    let t = cfg.band_width;
    let inner = bin.and_not(&morph(&bin, MorphOp::Erode, t)?)?;
    let outer = morph(&bin, MorphOp::Dilate, t)?.and_not(&bin)?;
    let cnr = cnr(&band_values(&inner, image), &band_values(&outer, image), eps);

    Ok(SampleForeground {
        area_ratio,
        foreground_area: area_f,
        shape: Some(ShapeParts {
            perimeter: p,
            circularity,
            solidity,
            convex_area,
            shape_score: 0.5 * circularity + 0.5 * solidity,
        }),
        boundary: Some(BoundaryParts {
            ring_area,
            boundary_width: ring_area as f64 / (p + eps),
            cnr,
            band_width: t,
        }),
    })
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Min-max normalizes boundary widths and CNRs over a dataset and combines
/// them into blur scores `w_n / (w_n + c_n + eps)`. A constant column maps
/// to 0.5 throughout.
pub fn blur_scores(widths: &[f64], cnrs: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let wn = min_max_normalize(widths);
    let cn = min_max_normalize(cnrs);
    let b = wn.iter().zip(&cn).map(|(w, c)| w / (w + c + eps)).collect();
    (wn, cn, b)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Characterizes every sample (in parallel) and derives dataset labels from
/// the median area ratio, shape score and blur score.
pub fn characterize_dataset(
    samples: &[(Mask, GrayImage)],
    cfg: &CharacterizeConfig,
) -> Result<DatasetForegroundProfile> {
    let measured: Vec<SampleForeground> = samples
        .par_iter()
        .map(|(m, img)| characterize_sample(m, img, cfg))
        .collect::<Result<_>>()?;
    profile_from_samples(measured, cfg)
}

pub(crate) fn profile_from_samples(
    measured: Vec<SampleForeground>,
    cfg: &CharacterizeConfig,
) -> Result<DatasetForegroundProfile> {
    let defined: Vec<usize> = (0..measured.len())
        .filter(|&i| measured[i].boundary.is_some())
        .collect();
    if defined.is_empty() {
        return Err(MaskError::AllEmpty);
    }
    let widths: Vec<f64> = defined
        .iter()
        .map(|&i| measured[i].boundary.as_ref().map_or(0.0, |b| b.boundary_width))
        .collect();
    let cnrs: Vec<f64> = defined
        .iter()
        .map(|&i| measured[i].boundary.as_ref().map_or(0.0, |b| b.cnr))
        .collect();
    let (wn, cn, b) = blur_scores(&widths, &cnrs, cfg.epsilon);

    let mut w_norm = vec![None; measured.len()];
    let mut c_norm = vec![None; measured.len()];
    let mut blur = vec![None; measured.len()];
    for (j, &i) in defined.iter().enumerate() {
        w_norm[i] = Some(wn[j]);
        c_norm[i] = Some(cn[j]);
        blur[i] = Some(b[j]);
    }

    let areas: Vec<f64> = measured.iter().map(|s| s.area_ratio).collect();
    let shapes: Vec<f64> = measured
        .iter()
        .filter_map(|s| s.shape.as_ref().map(|p| p.shape_score))
        .collect();
    let median_area_ratio = median(&areas);
    let median_shape_score = median(&shapes);
    let median_blur_score = median(&b);

    Ok(DatasetForegroundProfile {
        scale_label: if median_area_ratio < cfg.small_scale_below {
            ScaleLabel::Small
        } else {
            ScaleLabel::Large
        },
        shape_label: if median_shape_score < cfg.irregular_below {
            ShapeLabel::Irregular
        } else {
            ShapeLabel::Regular
        },
        boundary_label: if median_blur_score >= cfg.blur_at_least {
            BoundaryLabel::Blur
        } else {
            BoundaryLabel::Clear
        },
        samples: measured,
        w_norm,
        c_norm,
        blur_score: blur,
        median_area_ratio,
        median_shape_score,
        median_blur_score,
    })
}
