use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AdvisorError, Result};
use crate::mask::{BoundaryLabel, DatasetForegroundProfile, ScaleLabel, ShapeLabel};
use crate::registry::{DatasetTraits, Family, ModelCard, Modality};

macro_rules! ordered_bin {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
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
            type Err = AdvisorError;

            fn from_str(s: &str) -> Result<Self> {
                $(
                    if s.trim().eq_ignore_ascii_case($text) {
                        return Ok($name::$variant);
                    }
                )+
                Err(AdvisorError::InvalidValue {
                    field: stringify!($name),
                    value: s.to_string(),
                })
            }
        }
    };
}

ordered_bin!(
    /// Parameter count: `[0,10)`, `[10,50)`, `[50,200)`, `[200,∞)` million.
    StorageBin { Tiny => "Tiny", Small => "Small", Medium => "Medium", Large => "Large" }
);
ordered_bin!(
    /// GFLOPs: `[0,10)`, `[10,100)`, `[100,∞)`.
    ComputeBin { Low => "Low", Medium => "Medium", High => "High" }
);
ordered_bin!(
    /// Frames per second: `[0,15)`, `[15,60)`, `[60,∞)`.
    SpeedBin { Slow => "Slow", Medium => "Medium", Fast => "Fast" }
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelBins {
    pub storage: StorageBin,
    pub compute: ComputeBin,
    pub speed: SpeedBin,
}

fn bin_index(x: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| x >= e).count()
}

/// Half-open bins: a value on an edge lands in the upper bin.
pub fn discretize_model(params: f64, flops: f64, fps: f64) -> Result<ModelBins> {
    for (name, v) in [("params", params), ("flops", flops), ("fps", fps)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(AdvisorError::NonPositive { field: name, value: v });
        }
    }
    Ok(ModelBins {
        storage: StorageBin::ALL[bin_index(params, &[10.0, 50.0, 200.0])],
        compute: ComputeBin::ALL[bin_index(flops, &[10.0, 100.0])],
        speed: SpeedBin::ALL[bin_index(fps, &[15.0, 60.0])],
    })
}

/// Dataset-side slots: modality plus the three binary traits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFeatures {
    pub modality: Modality,
    pub scale: ScaleLabel,
    pub shape: ShapeLabel,
    pub boundary: BoundaryLabel,
}

impl DatasetFeatures {
    pub fn from_traits(modality: Modality, traits: &DatasetTraits) -> DatasetFeatures {
        DatasetFeatures {
            modality,
            scale: traits.scale,
            shape: traits.shape,
            boundary: traits.boundary,
        }
    }
}

/// Dataset slots from a measured profile and a modality name.
pub fn discretize_dataset(profile: &DatasetForegroundProfile, modality: &str) -> Result<DatasetFeatures> {
    let modality: Modality = modality.parse().map_err(|_| AdvisorError::InvalidValue {
        field: "modality",
        value: modality.to_string(),
    })?;
    Ok(DatasetFeatures {
        modality,
        scale: profile.scale_label,
        shape: profile.shape_label,
        boundary: profile.boundary_label,
    })
}

/// Dense feature row of one (dataset, model) pair; layout given by
/// [`FeatureVector::schema`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn schema() -> Vec<String> {
        let mut s: Vec<String> = Modality::ALL
            .iter()
            .map(|m| format!("modality={m}"))
            .collect();
        s.push("scale=small".into());
        s.push("shape=irregular".into());
        s.push("boundary=blur".into());
        s.extend(StorageBin::ALL.iter().map(|b| format!("storage={b}")));
        s.extend(ComputeBin::ALL.iter().map(|b| format!("compute={b}")));
        s.extend(SpeedBin::ALL.iter().map(|b| format!("speed={b}")));
        s.extend(Family::ALL.iter().map(|f| format!("family={f}")));
        s.push("ln_params".into());
        s.push("ln_flops".into());
        s.push("fps".into());
        s
    }

    pub fn len() -> usize {
        Modality::ALL.len() + 3 + 4 + 3 + 3 + Family::ALL.len() + 3
    }

    pub fn build(dataset: &DatasetFeatures, model: &ModelCard) -> Result<FeatureVector> {
        let bins = discretize_model(model.params_m, model.flops_g, model.fps)?;
        let mut v = Vec::with_capacity(Self::len());
        let onehot = |v: &mut Vec<f64>, n: usize, hot: usize| {
            v.extend((0..n).map(|i| f64::from(u8::from(i == hot))));
        };
        let pos = |all: &[Modality], m: Modality| all.iter().position(|&x| x == m).unwrap_or(0);
        onehot(&mut v, Modality::ALL.len(), pos(Modality::ALL, dataset.modality));
        v.push(f64::from(u8::from(dataset.scale == ScaleLabel::Small)));
        v.push(f64::from(u8::from(dataset.shape == ShapeLabel::Irregular)));
        v.push(f64::from(u8::from(dataset.boundary == BoundaryLabel::Blur)));
        onehot(&mut v, 4, bins.storage as usize);
        onehot(&mut v, 3, bins.compute as usize);
        onehot(&mut v, 3, bins.speed as usize);
        let fam = Family::ALL.iter().position(|&f| f == model.family).unwrap_or(0);
        onehot(&mut v, Family::ALL.len(), fam);
        v.push(model.params_m.ln());
        v.push(model.flops_g.ln());
        v.push(model.fps);
        Ok(FeatureVector(v))
    }
}
