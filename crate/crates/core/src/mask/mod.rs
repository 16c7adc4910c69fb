//! Pixel geometry on label masks: IoU, contour tracing, perimeter, convex
//! hull, box morphology and foreground characterization.
//!
//! Coordinates are screen coordinates: `x` grows to the right, `y` grows
//! downwards, and grids are stored row-major.

mod characterize;
mod contour;
mod morph;

use std::path::Path;

pub use characterize::{
    blur_scores, characterize_dataset, characterize_sample, BoundaryLabel, BoundaryParts,
    CharacterizeConfig, DatasetForegroundProfile, SampleForeground, ScaleLabel, ShapeLabel,
    ShapeParts,
};
pub use contour::{convex_hull_area, perimeter, trace_contours, Contour};
pub use morph::{boundary_ring, morph, MorphOp};

#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("grid has {got} cells, expected {width}x{height}")]
    BadLength {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("class_count must be at least 1")]
    ZeroClassCount,
    #[error("mask has no foreground")]
    EmptyForeground,
    #[error("morphology radius must be at least 1")]
    InvalidRadius,
    #[error("every sample in the dataset has an empty foreground")]
    AllEmpty,
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
}

pub type Result<T, E = MaskError> = std::result::Result<T, E>;

/// Row-major label grid; 0 is background, other values are class ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Mask> {
        if labels.len() != width * height {
            return Err(MaskError::BadLength {
                width,
                height,
                got: labels.len(),
            });
        }
        Ok(Mask {
            width,
            height,
            labels,
        })
    }

    pub fn empty(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    /// Binary mask from a predicate over `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Mask {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(u8::from(f(x, y)));
            }
        }
        Mask {
            width,
            height,
            labels,
        }
    }

    /// Filled axis-aligned rectangle `[x0, x0+w) × [y0, y0+h)`.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Mask {
        Mask::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.labels[y * self.width + x] = v;
    }

    /// Foreground test with out-of-range coordinates treated as background.
    pub fn is_fg(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.labels[y as usize * self.width + x as usize] != 0
    }

    pub fn binary(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&v| u8::from(v != 0)).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.iter().all(|&v| v == 0)
    }

    /// Binary `self AND NOT other`.
    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.same_dims(other)?;
        let labels = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(&a, &b)| u8::from(a != 0 && b == 0))
            .collect();
        Ok(Mask {
            width: self.width,
            height: self.height,
            labels,
        })
    }

    fn same_dims(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Decodes an 8-bit grayscale PNG; pixel values become labels.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Mask> {
        let img = decode(bytes, "<memory>")?;
        Ok(Mask {
            width: img.width() as usize,
            height: img.height() as usize,
            labels: img.into_raw(),
        })
    }

    pub fn load_png(path: &Path) -> Result<Mask> {
        let img = load(path)?;
        Ok(Mask {
            width: img.width() as usize,
            height: img.height() as usize,
            labels: img.into_raw(),
        })
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        encode(self.width, self.height, &self.labels)
    }
}

/// Row-major grayscale intensities in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    intensity: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, intensity: Vec<f64>) -> Result<GrayImage> {
        if intensity.len() != width * height {
            return Err(MaskError::BadLength {
                width,
                height,
                got: intensity.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            intensity,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> GrayImage {
        GrayImage {
            width,
            height,
            intensity: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        let mut intensity = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                intensity.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            intensity,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn load_png(path: &Path) -> Result<GrayImage> {
        let img = load(path)?;
        Ok(GrayImage {
            width: img.width() as usize,
            height: img.height() as usize,
            intensity: img.into_raw().into_iter().map(f64::from).collect(),
        })
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<GrayImage> {
        let img = decode(bytes, "<memory>")?;
        Ok(GrayImage {
            width: img.width() as usize,
            height: img.height() as usize,
            intensity: img.into_raw().into_iter().map(f64::from).collect(),
        })
    }
}

fn load(path: &Path) -> Result<image::GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| MaskError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode(&bytes, &path.display().to_string())
}

fn decode(bytes: &[u8], name: &str) -> Result<image::GrayImage> {
    image::load_from_memory(bytes)
        .map(|img| img.to_luma8())
        .map_err(|e| MaskError::Image {
            path: name.to_string(),
            message: e.to_string(),
        })
}

fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    image::GrayImage::from_raw(width as u32, height as u32, data.to_vec())
        .expect("buffer matches dimensions")
        .write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory png encode");
    out.into_inner()
}

/// Intersection over union.
///
/// With `class_count == 1` any nonzero cell is foreground. With more classes
/// the result is the mean of per-class IoU over classes `1..=class_count`,
/// skipping classes absent from both masks. Two empty masks score 1.
pub fn iou(pred: &Mask, truth: &Mask, class_count: u32) -> Result<f64> {
    pred.same_dims(truth)?;
    if class_count == 0 {
        return Err(MaskError::ZeroClassCount);
    }
    if class_count == 1 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
            let (p, t) = (p != 0, t != 0);
            inter += usize::from(p && t);
            union += usize::from(p || t);
        }
        return Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        });
    }
    let k = class_count as usize;
    let mut inter = vec![0usize; k + 1];
    let mut union = vec![0usize; k + 1];
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        let (p, t) = (p as usize, t as usize);
        if p == t {
            if p != 0 && p <= k {
                inter[p] += 1;
                union[p] += 1;
            }
        } else {
            if p != 0 && p <= k {
                union[p] += 1;
            }
            if t != 0 && t <= k {
                union[t] += 1;
            }
        }
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for c in 1..=k {
        if union[c] > 0 {
            sum += inter[c] as f64 / union[c] as f64;
            n += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}
