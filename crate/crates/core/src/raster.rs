//! In-memory rasters and the logits-to-probabilities bridge.
//!
//! All rasters are row-major. Multi-channel rasters are channel-major, so
//! channel `c`, row `r`, column `x` lives at `c * H * W + r * W + x`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Number of classes: background, pubic symphysis, fetal head.
pub const NUM_CLASSES: usize = 3;

/// Lower clamp for confidence values read from files.
pub const CONF_MIN: f64 = 1e-6;
/// Upper clamp for confidence values read from files.
pub const CONF_MAX: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
pub enum Class {
    Background = 0,
    Ps = 1,
    Fh = 2,
}

impl Class {
    pub const ALL: [Class; NUM_CLASSES] = [Class::Background, Class::Ps, Class::Fh];

    pub fn from_id(id: u8) -> Option<Class> {
        match id {
            0 => Some(Class::Background),
            1 => Some(Class::Ps),
            2 => Some(Class::Fh),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Background => "background",
            Class::Ps => "PS",
            Class::Fh => "FH",
        }
    }
}

fn check_extent(height: usize, width: usize, len: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput(format!(
            "raster extent must be nonzero, got {height}x{width}"
        )));
    }
    let expected = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::InvalidInput("raster extent overflows".into()))?;
    if len != expected {
        return Err(Error::InvalidInput(format!(
            "expected {expected} values for {channels}x{height}x{width}, got {len}"
        )));
    }
    Ok(())
}

/// Discrete segmentation: one class id per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        check_extent(height, width, labels.len(), 1)?;
        if let Some(pos) = labels.iter().position(|&l| l > 2) {
            return Err(Error::InvalidInput(format!(
                "label {} at index {pos} is not a class id",
                labels[pos]
            )));
        }
        Ok(Self { height, width, labels })
    }

    /// All-background mask.
    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Set one pixel. Panics on an id outside `{0,1,2}` or out-of-range index.
    pub fn set(&mut self, row: usize, col: usize, class: Class) {
        self.labels[row * self.width + col] = class.id();
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&l| l == class.id()).count()
    }

    pub fn same_extent(&self, height: usize, width: usize) -> bool {
        self.height == height && self.width == width
    }
}

/// Raw per-class segmentation scores, shape 3×H×W.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LogitMap {
    /// Rejects non-finite values with [`Error::InvalidInput`].
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(height, width, values.len(), NUM_CLASSES)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite logit at index {pos}")));
        }
        Ok(Self { height, width, values })
    }

    /// One-hot logits: `margin` on the labeled class, 0 elsewhere.
    pub fn from_mask(mask: &LabelMask, margin: f64) -> Self {
        let plane = mask.height * mask.width;
        let mut values = vec![0.0; NUM_CLASSES * plane];
        for (i, &l) in mask.labels.iter().enumerate() {
            values[l as usize * plane + i] = margin;
        }
        Self { height: mask.height, width: mask.width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        NUM_CLASSES
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, class: usize, row: usize, col: usize) -> f64 {
        self.values[class * self.plane() + row * self.width + col]
    }

    /// Mutable access for in-crate transforms that preserve finiteness.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Per-pixel class probabilities, shape 3×H×W, channels summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbMap {
    /// Validates range and per-pixel normalization (within 1e-9).
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(height, width, values.len(), NUM_CLASSES)?;
        let plane = height * width;
        for i in 0..plane {
            let mut sum = 0.0;
            for c in 0..NUM_CLASSES {
                let p = values[c * plane + i];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidInput(format!("probability {p} out of [0,1]")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "probabilities at pixel {i} sum to {sum}"
                )));
            }
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, class: usize, row: usize, col: usize) -> f64 {
        self.values[class * self.plane() + row * self.width + col]
    }
}

/// Spatial confidence in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ConfMap {
    /// Strict constructor: every value must lie in (0, 1).
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(height, width, values.len(), 1)?;
        if let Some(pos) = values.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidInput(format!(
                "confidence {} at index {pos} outside (0,1)",
                values[pos]
            )));
        }
        Ok(Self { height, width, values })
    }

    /// Loader constructor: clamps into `[CONF_MIN, CONF_MAX]`, rejects NaN.
    pub fn clamped(height: usize, width: usize, mut values: Vec<f64>) -> Result<Self> {
        check_extent(height, width, values.len(), 1)?;
        for (i, v) in values.iter_mut().enumerate() {
            if v.is_nan() {
                return Err(Error::InvalidInput(format!("NaN confidence at index {i}")));
            }
            *v = v.clamp(CONF_MIN, CONF_MAX);
        }
        Ok(Self { height, width, values })
    }

    pub fn uniform(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Nearest-pixel lookup at a continuous `(x, y)` position.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        let col = math::floor(x) as usize;
        let row = math::floor(y) as usize;
        if row >= self.height || col >= self.width {
            return None;
        }
        Some(self.get(row, col))
    }
}

/// Physical size of one pixel step, in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelSpacing {
    pub row_mm: f64,
    pub col_mm: f64,
}

impl PixelSpacing {
    pub fn new(row_mm: f64, col_mm: f64) -> Result<Self> {
        if !(row_mm > 0.0 && col_mm > 0.0 && row_mm.is_finite() && col_mm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pixel spacing must be positive, got ({row_mm}, {col_mm})"
            )));
        }
        Ok(Self { row_mm, col_mm })
    }

    pub fn isotropic(mm: f64) -> Result<Self> {
        Self::new(mm, mm)
    }

    pub fn is_isotropic(&self) -> bool {
        self.row_mm == self.col_mm
    }
}

impl Default for PixelSpacing {
    fn default() -> Self {
        Self { row_mm: 1.0, col_mm: 1.0 }
    }
}

/// Channel-wise softmax with per-pixel max subtraction.
///
/// `LogitMap` guarantees finite values, so this cannot fail; non-finite
/// inputs are rejected when the map is constructed.
pub fn softmax(logits: &LogitMap) -> ProbMap {
    let plane = logits.plane();
    let z = &logits.values;
    let mut out = vec![0.0; z.len()];
    for i in 0..plane {
        let [p0, p1, p2] = softmax3([z[i], z[plane + i], z[2 * plane + i]]);
        out[i] = p0;
        out[plane + i] = p1;
        out[2 * plane + i] = p2;
    }
    ProbMap { height: logits.height, width: logits.width, values: out }
}

#[inline]
pub(crate) fn softmax3(z: [f64; 3]) -> [f64; 3] {
    let m = z[0].max(z[1]).max(z[2]);
    let e = [math::exp(z[0] - m), math::exp(z[1] - m), math::exp(z[2] - m)];
    let s = e[0] + e[1] + e[2];
    [e[0] / s, e[1] / s, e[2] / s]
}

#[inline]
pub(crate) fn argmax3(z: [f64; 3]) -> u8 {
    let mut best = 0;
    if z[1] > z[best] {
        best = 1;
    }
    if z[2] > z[best] {
        best = 2;
    }
    best as u8
}

/// Per-pixel index of the largest logit; ties go to the lowest class id.
pub fn argmax_labels(logits: &LogitMap) -> LabelMask {
    let plane = logits.plane();
    let z = &logits.values;
    let labels = (0..plane)
        .map(|i| argmax3([z[i], z[plane + i], z[2 * plane + i]]))
        .collect();
    LabelMask { height: logits.height, width: logits.width, labels }
}
