//! Segmentation and measurement metrics: Dice, average symmetric surface
//! distance, percentile Hausdorff distance and AoP error, with mean ± std
//! aggregation over a test set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::morphology::{self, Pixel};
use crate::raster::{LabelMask, PixelSpacing};

/// Structures scored by the metrics. `PsFh` is the union of both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ClassSet {
    Ps,
    Fh,
    PsFh,
}

impl ClassSet {
    pub const ALL: [ClassSet; 3] = [ClassSet::PsFh, ClassSet::Ps, ClassSet::Fh];

    #[inline]
    pub fn contains(self, label: u8) -> bool {
        match self {
            ClassSet::Ps => label == 1,
            ClassSet::Fh => label == 2,
            ClassSet::PsFh => label == 1 || label == 2,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            ClassSet::Ps => "ps",
            ClassSet::Fh => "fh",
            ClassSet::PsFh => "psfh",
        }
    }
}

fn same_extent(pred: &LabelMask, gt: &LabelMask) -> Result<()> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::InvalidInput(format!(
            "extent mismatch: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}

/// `2|A∩B| / (|A|+|B|)`; two empty sets score 1.
pub fn dice(pred: &LabelMask, gt: &LabelMask, set: ClassSet) -> Result<f64> {
    same_extent(pred, gt)?;
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let (ip, ig) = (set.contains(p), set.contains(g));
        a += ip as usize;
        b += ig as usize;
        both += (ip && ig) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

// Exact squared Euclidean distance transform (lower envelope of parabolas),
// one axis at a time with per-axis spacing.
fn edt_1d(f: &[f64], step: f64, out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let s2 = step * step;
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_infinite() {
            continue;
        }
        loop {
            let Some(&v) = sites.last() else {
                sites.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let (qf, vf) = (q as f64, v as f64);
            let x = ((fq + s2 * qf * qf) - (f[v] + s2 * vf * vf)) / (2.0 * s2 * (qf - vf));
            if x <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(x);
                break;
            }
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while k + 1 < sites.len() && bounds[k + 1] < pf {
            k += 1;
        }
        let d = (p as f64 - sites[k] as f64) * step;
        *o = d * d + f[sites[k]];
    }
}

/// Squared mm distance from every pixel to the nearest pixel of `sites`.
fn squared_distance_map(h: usize, w: usize, sites: &[Pixel], spacing: PixelSpacing) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; h * w];
    for &(r, c) in sites {
        grid[r * w + c] = 0.0;
    }
    let (mut stack, mut bounds) = (Vec::new(), Vec::new());
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = grid[r * w + c];
        }
        edt_1d(&col, spacing.row_mm, &mut col_out, &mut stack, &mut bounds);
        for r in 0..h {
            grid[r * w + c] = col_out[r];
        }
    }
    let mut row_out = vec![0.0; w];
    for r in 0..h {
        edt_1d(&grid[r * w..(r + 1) * w], spacing.col_mm, &mut row_out, &mut stack, &mut bounds);
        grid[r * w..(r + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Boundary-to-boundary distances in mm: pred→gt followed by gt→pred.
pub fn surface_distances(
    pred: &LabelMask,
    gt: &LabelMask,
    set: ClassSet,
    spacing: PixelSpacing,
) -> Result<Vec<f64>> {
    same_extent(pred, gt)?;
    let pb = morphology::region_boundary(pred, |l| set.contains(l));
    let gb = morphology::region_boundary(gt, |l| set.contains(l));
    if pb.is_empty() || gb.is_empty() {
        return Err(Error::EmptyStructure);
    }
    let (h, w) = (pred.height(), pred.width());
    let to_gt = squared_distance_map(h, w, &gb, spacing);
    let to_pred = squared_distance_map(h, w, &pb, spacing);
    let mut out = Vec::with_capacity(pb.len() + gb.len());
    out.extend(pb.iter().map(|&(r, c)| math::sqrt(to_gt[r * w + c])));
    out.extend(gb.iter().map(|&(r, c)| math::sqrt(to_pred[r * w + c])));
    Ok(out)
}

/// Arithmetic mean of the symmetric distance set.
pub fn asd(distances: &[f64]) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::InvalidInput("empty distance set".into()));
    }
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

/// Value at rank `ceil(q/100 · n)` of the ascending sort; `q = 100` is the maximum.
pub fn hd_percentile(distances: &[f64], q: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::InvalidInput("empty distance set".into()));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::InvalidInput(format!("percentile {q} outside (0, 100]")));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (math::ceil(q * n as f64 / 100.0) as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

pub fn aop_abs_error(pred_deg: f64, gt_deg: f64) -> f64 {
    (pred_deg - gt_deg).abs()
}

/// Per-case metric values; `None` marks a value that could not be computed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseMetrics {
    pub case_id: String,
    pub dice_psfh: Option<f64>,
    pub dice_ps: Option<f64>,
    pub dice_fh: Option<f64>,
    pub asd_psfh: Option<f64>,
    pub asd_ps: Option<f64>,
    pub asd_fh: Option<f64>,
    pub hd100_psfh: Option<f64>,
    pub hd100_ps: Option<f64>,
    pub hd100_fh: Option<f64>,
    pub aop_abs_err: Option<f64>,
}

/// Column order used by reports.
pub const FIELDS: [&str; 10] = [
    "dice_psfh",
    "dice_ps",
    "dice_fh",
    "asd_psfh",
    "asd_ps",
    "asd_fh",
    "hd100_psfh",
    "hd100_ps",
    "hd100_fh",
    "aop_abs_err",
];

impl CaseMetrics {
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.dice_psfh,
            self.dice_ps,
            self.dice_fh,
            self.asd_psfh,
            self.asd_ps,
            self.asd_fh,
            self.hd100_psfh,
            self.hd100_ps,
            self.hd100_fh,
            self.aop_abs_err,
        ]
    }
}

/// Full metric battery for one case.
pub fn case_metrics(
    case_id: impl Into<String>,
    pred: &LabelMask,
    gt: &LabelMask,
    spacing: PixelSpacing,
    aop_abs_err: Option<f64>,
) -> Result<CaseMetrics> {
    let dice_of = |set| dice(pred, gt, set).map(Some);
    let dist_of = |set| match surface_distances(pred, gt, set, spacing) {
        Ok(d) => Ok((asd(&d).ok(), hd_percentile(&d, 100.0).ok())),
        Err(Error::EmptyStructure) => Ok((None, None)),
        Err(e) => Err(e),
    };
    let (asd_psfh, hd100_psfh) = dist_of(ClassSet::PsFh)?;
    let (asd_ps, hd100_ps) = dist_of(ClassSet::Ps)?;
    let (asd_fh, hd100_fh) = dist_of(ClassSet::Fh)?;
    Ok(CaseMetrics {
        case_id: case_id.into(),
        dice_psfh: dice_of(ClassSet::PsFh)?,
        dice_ps: dice_of(ClassSet::Ps)?,
        dice_fh: dice_of(ClassSet::Fh)?,
        asd_psfh,
        asd_ps,
        asd_fh,
        hd100_psfh,
        hd100_ps,
        hd100_fh,
        aop_abs_err,
    })
}

/// Mean and population standard deviation of one field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldSummary {
    pub field: String,
    /// `None` when no case produced a value.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub cases: Vec<CaseMetrics>,
    pub summary: Vec<FieldSummary>,
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, math::sqrt(var)))
}

pub fn aggregate(cases: Vec<CaseMetrics>) -> Result<MetricsReport> {
    if cases.is_empty() {
        return Err(Error::InvalidInput("no cases to aggregate".into()));
    }
    let summary = FIELDS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = cases.iter().filter_map(|c| c.values()[k]).collect();
            let stats = mean_std(&values);
            FieldSummary {
                field: String::from(*name),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                count: values.len(),
                excluded: cases.len() - values.len(),
            }
        })
        .collect();
    Ok(MetricsReport { cases, summary })
}
