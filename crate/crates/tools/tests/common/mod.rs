//! Helpers shared by the integration tests: an in-process CLI runner and
//! brute-force metric references.

#![allow(dead_code)]

use aop_core::metrics::ClassSet;
use aop_core::raster::{LabelMask, PixelSpacing};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn aop(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = aop_tools::cli::run(std::iter::once("aop").chain(args.iter().copied()), &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn boundary(m: &LabelMask, set: ClassSet) -> Vec<(usize, usize)> {
    let (h, w) = (m.height() as isize, m.width() as isize);
    let inside = |r: isize, c: isize| r >= 0 && c >= 0 && r < h && c < w && set.contains(m.get(r as usize, c as usize));
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if inside(r, c) && !(inside(r - 1, c) && inside(r + 1, c) && inside(r, c - 1) && inside(r, c + 1)) {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

/// Every pred-boundary to gt-boundary pair, then the reverse, sorted.
pub fn brute_distances(a: &LabelMask, b: &LabelMask, set: ClassSet, s: PixelSpacing) -> Option<Vec<f64>> {
    let (pa, pb) = (boundary(a, set), boundary(b, set));
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let nearest = |p: (usize, usize), other: &[(usize, usize)]| {
        other
            .iter()
            .map(|q| {
                let dy = (p.0 as f64 - q.0 as f64) * s.row_mm;
                let dx = (p.1 as f64 - q.1 as f64) * s.col_mm;
                (dy * dy + dx * dx).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut d: Vec<f64> = pa.iter().map(|&p| nearest(p, &pb)).chain(pb.iter().map(|&p| nearest(p, &pa))).collect();
    d.sort_by(f64::total_cmp);
    Some(d)
}

pub fn brute_dice(a: &LabelMask, b: &LabelMask, set: ClassSet) -> f64 {
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        na += set.contains(x) as usize;
        nb += set.contains(y) as usize;
        both += (set.contains(x) && set.contains(y)) as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// `(dice, asd, hd100)` for one class set by brute force.
pub fn brute_metrics(a: &LabelMask, b: &LabelMask, set: ClassSet, s: PixelSpacing) -> (f64, Option<f64>, Option<f64>) {
    let d = brute_distances(a, b, set, s);
    let asd = d.as_ref().map(|d| d.iter().sum::<f64>() / d.len() as f64);
    let hd = d.as_ref().map(|d| *d.last().unwrap());
    (brute_dice(a, b, set), asd, hd)
}

/// Mean and population std, two passes.
pub fn two_pass(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}
