//! Seeded synthetic cases with analytically known angle of progression.
//!
//! The fetal head is a filled ellipse. The pubic symphysis is a segment
//! thickened to a fixed half-width whose two ends taper to 90° points, so
//! that the endpoints themselves are the unique extreme pixels along the
//! axis when they sit on pixel centers. Ground truth comes from the
//! continuous shapes, never from the pixel pipeline.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{self, angle_at, Ellipse, Point, PsAxis};
use crate::math;
use crate::morphology;
use crate::raster::{self, Class, ConfMap, LabelMask, LogitMap};
use crate::rng::SplitMix64;

/// Logit given to the true class in clean phantoms (others get 0).
pub const LOGIT_MARGIN: f64 = 5.0;
/// Extent used by [`suite`].
pub const SUITE_EXTENT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ConfField {
    Uniform { value: f64 },
    /// Linear falloff from `v_max` at `center` to `v_min` at the farthest image corner.
    RadialFalloff { center: Point, v_max: f64, v_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Corruption {
    None,
    /// Zero-mean Gaussian noise on every logit.
    LogitNoise { sigma: f64 },
    /// Constant offset on one class channel.
    LogitBias { class: Class, delta: f64 },
    /// Peel `iterations` rings of foreground boundary pixels to background.
    BoundaryErosion { iterations: usize },
}

/// Pubic symphysis: segment `p_sup`–`p_inf` thickened to `half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsSegment {
    pub p_sup: Point,
    pub p_inf: Point,
    pub half_width: f64,
}

impl PsSegment {
    pub fn length(&self) -> f64 {
        self.p_sup.dist(self.p_inf)
    }

    fn frame(&self) -> (Point, Point, f64) {
        let d = self.p_sup - self.p_inf;
        let len = d.norm();
        let u = d * (1.0 / len);
        (u, Point::new(-u.y, u.x), len)
    }

    /// Center-in-shape test: lateral offset at most `min(w, s, L − s)` where
    /// `s` is the position along the axis from `p_inf`.
    pub fn contains(&self, p: Point) -> bool {
        const TOL: f64 = 1e-9;
        let (u, n, len) = self.frame();
        let d = p - self.p_inf;
        let s = d.dot(u);
        let lateral = d.dot(n).abs();
        if s < -TOL || s > len + TOL {
            return false;
        }
        lateral <= self.half_width.min(s).min(len - s) + TOL
    }

    /// Outline vertices (hexagon, or rhombus when the segment is short).
    pub fn outline(&self) -> Vec<Point> {
        let (u, n, len) = self.frame();
        let w = self.half_width.min(len / 2.0);
        let a = self.p_inf;
        let b = self.p_sup;
        vec![
            a,
            a + u * w + n * w,
            b - u * w + n * w,
            b,
            b - u * w - n * w,
            a + u * w - n * w,
        ]
    }

    pub fn axis(&self) -> PsAxis {
        PsAxis { p_sup: self.p_sup, p_inf: self.p_inf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub fh_ellipse: Ellipse,
    pub ps: PsSegment,
    pub conf_field: ConfField,
    pub corruption: Corruption,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub spec: PhantomSpec,
    pub mask: LabelMask,
    pub conf: ConfMap,
    pub logits: LogitMap,
    pub gt_aop_deg: f64,
    /// Analytic tangent point on the ground-truth ellipse.
    pub gt_tangent: Point,
}

impl PhantomCase {
    pub fn gt_ellipse(&self) -> Ellipse {
        self.spec.fh_ellipse
    }

    pub fn gt_ps(&self) -> PsSegment {
        self.spec.ps
    }
}

fn ellipse_half_extent(e: &Ellipse) -> (f64, f64) {
    let (s, c) = (math::sin(e.theta), math::cos(e.theta));
    let hx = math::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
    let hy = math::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
    (hx, hy)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + ab * t)
}

/// Smallest distance between the ellipse and the PS shape, measured from
/// dense ellipse samples to the PS outline; negative when they overlap.
fn shape_gap(e: &Ellipse, ps: &PsSegment) -> f64 {
    let outline = ps.outline();
    if outline.iter().any(|&p| e.implicit(p) <= 1.0) {
        return -1.0;
    }
    let n = (math::ceil(2.0 * PI * e.a * 4.0) as usize).max(64);
    let mut gap = f64::INFINITY;
    for i in 0..n {
        let q = e.point_at(2.0 * PI * i as f64 / n as f64);
        if ps.contains(q) {
            return -1.0;
        }
        for k in 0..outline.len() {
            gap = gap.min(segment_distance(q, outline[k], outline[(k + 1) % outline.len()]));
        }
    }
    gap
}

/// Checks every geometric invariant of `spec`.
pub fn validate(spec: &PhantomSpec) -> Result<()> {
    let bad = |msg: &str| Err(Error::InvalidSpec(msg.into()));
    if spec.height == 0 || spec.width == 0 {
        return bad("extent must be nonzero");
    }
    let e = &spec.fh_ellipse;
    if Ellipse::new(e.cx, e.cy, e.a, e.b, e.theta).ok() != Some(*e) {
        return bad("ellipse must be canonical (a >= b > 0, theta in [0, pi))");
    }
    let ps = &spec.ps;
    let finite = [ps.p_sup.x, ps.p_sup.y, ps.p_inf.x, ps.p_inf.y, ps.half_width];
    if !finite.iter().all(|v| v.is_finite()) || !(ps.half_width > 0.0) || !(ps.length() > 0.0) {
        return bad("PS segment needs distinct finite endpoints and positive half-width");
    }
    if !(e.implicit(ps.p_inf) > 1.0) {
        return bad("p_inf must lie strictly outside the FH ellipse");
    }
    let (h, w) = (spec.height as f64, spec.width as f64);
    let (hx, hy) = ellipse_half_extent(e);
    if e.cx - hx < 0.0 || e.cx + hx > w || e.cy - hy < 0.0 || e.cy + hy > h {
        return bad("FH ellipse leaves the image");
    }
    if ps.outline().iter().any(|p| p.x < 0.0 || p.x > w || p.y < 0.0 || p.y > h) {
        return bad("PS segment leaves the image");
    }
    if !(shape_gap(e, ps) > 0.0) {
        return bad("PS segment and FH ellipse overlap");
    }
    match spec.conf_field {
        ConfField::Uniform { value } if value > 0.0 && value < 1.0 => {}
        ConfField::RadialFalloff { center, v_max, v_min }
            if center.x.is_finite() && center.y.is_finite() && v_min > 0.0 && v_min <= v_max && v_max < 1.0 => {}
        _ => return bad("confidence values must lie in (0,1) with v_min <= v_max"),
    }
    match spec.corruption {
        Corruption::LogitNoise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => bad("noise sigma must be >= 0"),
        Corruption::LogitBias { delta, .. } if !delta.is_finite() => bad("bias must be finite"),
        _ => Ok(()),
    }
}

/// Ground-truth angle at `p_inf` against the maximize-angle tangent, in
/// degrees, with that tangent point.
pub fn analytic_aop(e: &Ellipse, ps: &PsSegment) -> Result<(f64, Point)> {
    let candidates = geometry::tangent_points(e, ps.p_inf)?;
    let t = geometry::select_tangent(&ps.axis(), candidates);
    Ok((angle_at(ps.p_inf, ps.p_sup, t) * 180.0 / PI, t))
}

fn rasterize_conf(field: &ConfField, h: usize, w: usize) -> Result<ConfMap> {
    match *field {
        ConfField::Uniform { value } => ConfMap::uniform(h, w, value),
        ConfField::RadialFalloff { center, v_max, v_min } => {
            let corners = [Point::new(0.0, 0.0), Point::new(w as f64, 0.0), Point::new(0.0, h as f64), Point::new(w as f64, h as f64)];
            let reach = corners.iter().map(|c| c.dist(center)).fold(0.0, f64::max).max(1.0);
            let mut values = Vec::with_capacity(h * w);
            for r in 0..h {
                for c in 0..w {
                    let d = morphology::pixel_center((r, c)).dist(center);
                    let t = (1.0 - d / reach).max(0.0);
                    values.push(v_min + (v_max - v_min) * t);
                }
            }
            ConfMap::new(h, w, values)
        }
    }
}

/// Rasterizes `spec`, derives ground truth analytically, and applies its
/// corruption seeded by `spec.seed`.
pub fn generate(spec: &PhantomSpec) -> Result<PhantomCase> {
    validate(spec)?;
    let (h, w) = (spec.height, spec.width);
    let mut mask = LabelMask::empty(h, w)?;
    for r in 0..h {
        for c in 0..w {
            let p = morphology::pixel_center((r, c));
            if spec.fh_ellipse.implicit(p) <= 1.0 {
                mask.set(r, c, Class::Fh);
            } else if spec.ps.contains(p) {
                mask.set(r, c, Class::Ps);
            }
        }
    }
    if mask.count(Class::Fh) == 0 || mask.count(Class::Ps) == 0 {
        return Err(Error::InvalidSpec("a structure covers no pixel center".into()));
    }
    let conf = rasterize_conf(&spec.conf_field, h, w)?;
    let (gt_aop_deg, gt_tangent) =
        analytic_aop(&spec.fh_ellipse, &spec.ps).map_err(|e| Error::InvalidSpec(format!("{e}")))?;
    if !(gt_aop_deg > 0.0 && gt_aop_deg < 180.0) {
        return Err(Error::InvalidSpec(format!("ground-truth angle {gt_aop_deg} outside (0,180)")));
    }
    let logits = LogitMap::from_mask(&mask, LOGIT_MARGIN);
    let clean = PhantomCase { spec: *spec, mask, conf, logits, gt_aop_deg, gt_tangent };
    Ok(corrupt(&clean, spec.corruption, spec.seed))
}

/// Inference-time corruption of the logits; mask and ground truth are kept.
pub fn corrupt(case: &PhantomCase, corruption: Corruption, seed: u64) -> PhantomCase {
    let mut out = case.clone();
    out.spec.corruption = corruption;
    let plane = out.logits.plane();
    match corruption {
        Corruption::None => {}
        Corruption::LogitNoise { sigma } => {
            if sigma != 0.0 {
                let mut rng = SplitMix64::split(seed, 0x006e_6f69_7365);
                for v in out.logits.values_mut() {
                    *v += sigma * rng.normal();
                }
            }
        }
        Corruption::LogitBias { class, delta } => {
            let base = class.index() * plane;
            for v in &mut out.logits.values_mut()[base..base + plane] {
                *v += delta;
            }
        }
        Corruption::BoundaryErosion { iterations } => {
            let mut labels = raster::argmax_labels(&out.logits);
            let w = labels.width();
            for _ in 0..iterations {
                let ring = morphology::region_boundary(&labels, |l| l != 0);
                if ring.is_empty() {
                    break;
                }
                let values = out.logits.values_mut();
                for &(r, c) in &ring {
                    let i = r * w + c;
                    let winner = labels.get(r, c) as usize;
                    values.swap(i, winner * plane + i);
                    labels.set(r, c, Class::Background);
                }
            }
        }
    }
    out
}

fn rotate(v: Point, angle: f64) -> Point {
    let (s, c) = (math::sin(angle), math::cos(angle));
    Point::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Draws one valid random spec on a `SUITE_EXTENT` square.
///
/// The FH ellipse is placed tangent to a ray from `p_inf` at a target
/// angle in [70°, 160°] from the PS axis, on the side facing the axis, so
/// that the wider-angle tangent is that ray. Endpoints sit on pixel centers.
pub fn random_spec(rng: &mut SplitMix64, seed: u64) -> PhantomSpec {
    let extent = SUITE_EXTENT as f64;
    let mut alpha = rng.uniform(70.0, 160.0) * PI / 180.0;
    let mut attempts = 0usize;
    loop {
        // The target angle is kept across retries so the suite covers the
        // whole range; only an unlucky angle is redrawn.
        attempts += 1;
        if attempts.is_multiple_of(20_000) {
            alpha = rng.uniform(70.0, 160.0) * PI / 180.0;
        }
        let phi = rng.uniform(0.0, 2.0 * PI);
        let target_len = rng.uniform(30.0, 80.0);
        let dx = math::floor(target_len * math::cos(phi) + 0.5);
        let dy = math::floor(target_len * math::sin(phi) + 0.5);
        let len = math::hypot(dx, dy);
        if !(30.0..=80.0).contains(&len) {
            continue;
        }
        let u = Point::new(dx / len, dy / len);
        let half_width = rng.uniform(2.5, 4.5);
        let side = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
        let (mut a, mut b) = (rng.uniform(15.0, 60.0), rng.uniform(15.0, 60.0));
        if a < b {
            core::mem::swap(&mut a, &mut b);
        }
        let theta = rng.uniform(0.0, PI);
        let reach = rng.uniform(70.0, 175.0);

        // Work with p_inf at the origin, translate at the end.
        let ray = rotate(u, side * alpha);
        let touch = ray * reach;
        let mut normal = Point::new(-ray.y, ray.x);
        if normal.dot(u) > 0.0 {
            normal = normal * -1.0;
        }
        let (s, c) = (math::sin(theta), math::cos(theta));
        let nl = Point::new(c * normal.x + s * normal.y, -s * normal.x + c * normal.y);
        let k = math::sqrt(a * a * nl.x * nl.x + b * b * nl.y * nl.y);
        let local = Point::new(a * a * nl.x / k, b * b * nl.y / k);
        let offset = Point::new(c * local.x - s * local.y, s * local.x + c * local.y);
        let center = touch - offset;

        let probe = Ellipse { cx: center.x, cy: center.y, a, b, theta };
        let (hx, hy) = ellipse_half_extent(&probe);
        let ps0 = PsSegment { p_sup: Point::new(dx, dy), p_inf: Point::new(0.0, 0.0), half_width };
        let mut lo = Point::new(center.x - hx, center.y - hy);
        let mut hi = Point::new(center.x + hx, center.y + hy);
        for p in ps0.outline() {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let margin = 4.0;
        // p_inf = (i + 0.5, j + 0.5) with lo + p_inf >= margin and hi + p_inf <= extent - margin.
        let i_lo = math::ceil(margin - lo.x - 0.5) as i64;
        let i_hi = math::floor(extent - margin - hi.x - 0.5) as i64;
        let j_lo = math::ceil(margin - lo.y - 0.5) as i64;
        let j_hi = math::floor(extent - margin - hi.y - 0.5) as i64;
        if i_lo > i_hi || j_lo > j_hi {
            continue;
        }
        let shift = Point::new(rng.range_i64(i_lo, i_hi) as f64 + 0.5, rng.range_i64(j_lo, j_hi) as f64 + 0.5);
        let fh_ellipse = match Ellipse::new(center.x + shift.x, center.y + shift.y, a, b, theta) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let ps = PsSegment { p_sup: ps0.p_sup + shift, p_inf: shift, half_width };

        let fh_center = fh_ellipse.center();
        if fh_center.dist(ps.p_inf) + 5.0 > fh_center.dist(ps.p_sup) {
            continue;
        }
        if shape_gap(&fh_ellipse, &ps) < 3.0 {
            continue;
        }
        match analytic_aop(&fh_ellipse, &ps) {
            Ok((deg, _)) if (deg - alpha * 180.0 / PI).abs() < 1e-6 => {}
            _ => continue,
        }
        let spec = PhantomSpec {
            height: SUITE_EXTENT,
            width: SUITE_EXTENT,
            fh_ellipse,
            ps,
            conf_field: ConfField::RadialFalloff { center: fh_center, v_max: 0.95, v_min: 0.4 },
            corruption: Corruption::None,
            seed,
        };
        if validate(&spec).is_ok() {
            return spec;
        }
    }
}

/// Seed of case `index` in a suite.
pub fn case_seed(base_seed: u64, index: u64) -> u64 {
    SplitMix64::split(base_seed, index).next_u64()
}

/// Clean random case drawn from a generator seeded with `seed`.
pub fn random_case(seed: u64) -> Result<PhantomCase> {
    let mut rng = SplitMix64::new(seed);
    generate(&random_spec(&mut rng, seed))
}

/// `n` clean random cases; case `i` depends only on `(base_seed, i)`.
pub fn suite(n: usize, base_seed: u64) -> Result<Vec<PhantomCase>> {
    if n == 0 {
        return Err(Error::InvalidInput("suite size must be at least 1".into()));
    }
    (0..n as u64).map(|i| random_case(case_seed(base_seed, i))).collect()
}

/// Share of pixels where the labels differ.
pub fn disagreement_rate(a: &LabelMask, b: &LabelMask) -> f64 {
    let diff = a.labels().iter().zip(b.labels()).filter(|(x, y)| x != y).count();
    diff as f64 / a.labels().len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{argmax_labels, PixelSpacing};

    fn circle_spec(conf_field: ConfField) -> PhantomSpec {
        PhantomSpec {
            height: 256,
            width: 256,
            fh_ellipse: Ellipse::new(128.0, 160.0, 30.0, 30.0, 0.0).unwrap(),
            ps: PsSegment { p_sup: Point::new(128.0, 40.0), p_inf: Point::new(128.0, 80.0), half_width: 3.0 },
            conf_field,
            corruption: Corruption::None,
            seed: 1,
        }
    }

    #[test]
    fn circle_ground_truth_in_closed_form() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.9 })).unwrap();
        // Centre straight below p_inf at distance 80, radius 30: each tangent
        // leaves the downward ray at asin(30/80); the PS ray points up.
        let expected = 180.0 - (30.0f64 / 80.0).asin().to_degrees();
        assert!((case.gt_aop_deg - expected).abs() < 1e-9, "{}", case.gt_aop_deg);
        let tangent_len = (80.0f64 * 80.0 - 30.0 * 30.0).sqrt();
        assert!((case.gt_tangent.dist(Point::new(128.0, 80.0)) - tangent_len).abs() < 1e-9);
        // Symmetric tie resolved toward the smaller x.
        assert!(case.gt_tangent.x < 128.0);
        let res = geometry::compute_aop(&case.mask, &case.conf, PixelSpacing::default()).unwrap();
        assert!((res.aop_deg - expected).abs() <= 1.0, "{}", res.aop_deg);
    }

    #[test]
    fn uniform_field_rasterizes_to_constant() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.7 })).unwrap();
        assert!(case.conf.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn radial_field_falls_off_from_center() {
        let center = Point::new(128.0, 160.0);
        let case = generate(&circle_spec(ConfField::RadialFalloff { center, v_max: 0.9, v_min: 0.2 })).unwrap();
        let near = case.conf.get(159, 127);
        let far = case.conf.get(0, 0);
        assert!(near > 0.89 && near <= 0.9);
        assert!(far >= 0.2 && far < near);
        assert!(case.conf.values().iter().all(|&v| (0.2..=0.9).contains(&v)));
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = circle_spec(ConfField::Uniform { value: 0.5 });
        spec.corruption = Corruption::LogitNoise { sigma: 1.0 };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let bits = |c: &PhantomCase| c.logits.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn clean_logits_reproduce_the_mask() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.5 })).unwrap();
        assert_eq!(argmax_labels(&case.logits), case.mask);
        let v = case.logits.values();
        assert!(v.iter().all(|&x| x == 0.0 || x == LOGIT_MARGIN));
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.5 })).unwrap();
        let noisy = corrupt(&case, Corruption::LogitNoise { sigma: 0.0 }, 99);
        assert_eq!(noisy.logits, case.logits);
        assert_eq!(noisy.mask, case.mask);
        assert_eq!(noisy.gt_aop_deg, case.gt_aop_deg);
    }

    #[test]
    fn saturating_background_bias() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.5 })).unwrap();
        let biased = corrupt(&case, Corruption::LogitBias { class: Class::Background, delta: 100.0 }, 0);
        let labels = argmax_labels(&biased.logits);
        assert!(labels.labels().iter().all(|&l| l == 0));
        assert_eq!(biased.mask, case.mask);
    }

    #[test]
    fn seeded_noise_disagrees_reproducibly() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.5 })).unwrap();
        let a = corrupt(&case, Corruption::LogitNoise { sigma: 2.0 }, 11);
        let b = corrupt(&case, Corruption::LogitNoise { sigma: 2.0 }, 11);
        let rate = disagreement_rate(&argmax_labels(&a.logits), &case.mask);
        assert!(rate > 0.0);
        assert_eq!(rate, disagreement_rate(&argmax_labels(&b.logits), &case.mask));
        assert_eq!(a.logits, b.logits);
        let c = corrupt(&case, Corruption::LogitNoise { sigma: 2.0 }, 12);
        assert_ne!(a.logits, c.logits);
    }

    #[test]
    fn erosion_peels_rings() {
        let case = generate(&circle_spec(ConfField::Uniform { value: 0.5 })).unwrap();
        let fg = |m: &LabelMask| m.labels().iter().filter(|&&l| l != 0).count();
        let one = argmax_labels(&corrupt(&case, Corruption::BoundaryErosion { iterations: 1 }, 0).logits);
        let two = argmax_labels(&corrupt(&case, Corruption::BoundaryErosion { iterations: 2 }, 0).logits);
        let ring = morphology::region_boundary(&case.mask, |l| l != 0).len();
        assert_eq!(fg(&one), fg(&case.mask) - ring);
        assert!(fg(&two) < fg(&one));
        // Eroded pixels only ever become background.
        for (i, &l) in two.labels().iter().enumerate() {
            assert!(l == 0 || l == case.mask.labels()[i]);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = circle_spec(ConfField::Uniform { value: 0.5 });
        let mut inside = base;
        inside.ps.p_inf = Point::new(128.0, 150.0);
        assert!(matches!(generate(&inside), Err(Error::InvalidSpec(_))));
        let mut overlap = base;
        // Tip outside the circle but the body cuts through it.
        overlap.ps = PsSegment { p_sup: Point::new(100.0, 135.0), p_inf: Point::new(150.0, 135.0), half_width: 3.0 };
        assert!(overlap.fh_ellipse.implicit(overlap.ps.p_inf) > 1.0);
        assert!(matches!(generate(&overlap), Err(Error::InvalidSpec(_))));
        let mut outside = base;
        outside.fh_ellipse = Ellipse::new(128.0, 240.0, 30.0, 30.0, 0.0).unwrap();
        assert!(matches!(generate(&outside), Err(Error::InvalidSpec(_))));
        let mut conf = base;
        conf.conf_field = ConfField::Uniform { value: 1.0 };
        assert!(matches!(generate(&conf), Err(Error::InvalidSpec(_))));
        let mut sigma = base;
        sigma.corruption = Corruption::LogitNoise { sigma: -1.0 };
        assert!(matches!(generate(&sigma), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn suite_sizes() {
        assert!(suite(0, 0).is_err());
        let one = suite(1, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], suite(3, 5).unwrap()[0]);
    }

    #[test]
    fn tips_are_recovered_exactly() {
        for case in suite(20, 3).unwrap() {
            let res = geometry::compute_aop(&case.mask, &case.conf, PixelSpacing::default()).unwrap();
            assert_eq!(res.p3, case.spec.ps.p_inf);
            assert_eq!(res.p1, case.spec.ps.p_sup);
        }
    }
}
