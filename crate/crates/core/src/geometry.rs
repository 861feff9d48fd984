//! Confidence-weighted geometric modeling: ellipse fit of the fetal head
//! contour, pubic symphysis axis, tangent construction and the angle of
//! progression with its confidence score.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use crate::error::{AtStage, Error, Result, Stage, StageError};
use crate::linalg::{self, Mat3};
use crate::math;
use crate::morphology::{self, Component, WeightedPoints};
use crate::raster::{Class, ConfMap, LabelMask, PixelSpacing};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    fn lex_lt(self, other: Point) -> bool {
        self.x < other.x || (self.x == other.x && self.y < other.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Unsigned angle at `vertex` between the rays to `a` and `b`, in radians.
pub fn angle_at(vertex: Point, a: Point, b: Point) -> f64 {
    let u = a - vertex;
    let v = b - vertex;
    math::atan2(u.cross(v).abs(), u.dot(v))
}

// ── Ellipse ────────────────────────────────────────────────────────────────

/// Ellipse in pixel coordinates. `a ≥ b > 0`, `theta ∈ [0, π)` is the
/// direction of the major axis measured from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

/// General conic `A x² + B xy + C y² + D x + E y + F = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic(pub [f64; 6]);

fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % PI;
    if t < 0.0 {
        t += PI;
    }
    if t >= PI {
        t -= PI;
    }
    t
}

impl Ellipse {
    /// Canonicalizes the axis order and the orientation range.
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Result<Self> {
        if ![cx, cy, a, b, theta].iter().all(|v| v.is_finite()) || !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidInput("ellipse parameters must be finite with positive axes".into()));
        }
        let (a, b, theta) = if a >= b { (a, b, theta) } else { (b, a, theta + PI / 2.0) };
        Ok(Self { cx, cy, a, b, theta: normalize_angle(theta) })
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    /// Coordinates of `p` in the ellipse frame scaled to the unit circle.
    pub fn to_unit(&self, p: Point) -> Point {
        let (s, c) = (math::sin(self.theta), math::cos(self.theta));
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        Point::new((c * dx + s * dy) / self.a, (-s * dx + c * dy) / self.b)
    }

    pub fn from_unit(&self, u: Point) -> Point {
        let (s, c) = (math::sin(self.theta), math::cos(self.theta));
        let (ex, ey) = (self.a * u.x, self.b * u.y);
        Point::new(self.cx + c * ex - s * ey, self.cy + s * ex + c * ey)
    }

    /// `(x'/a)² + (y'/b)²` in the ellipse frame: 1 on the curve, < 1 inside.
    pub fn implicit(&self, p: Point) -> f64 {
        let u = self.to_unit(p);
        u.x * u.x + u.y * u.y
    }

    pub fn contains(&self, p: Point) -> bool {
        self.implicit(p) < 1.0
    }

    /// Point at parametric angle `t`.
    pub fn point_at(&self, t: f64) -> Point {
        self.from_unit(Point::new(math::cos(t), math::sin(t)))
    }

    pub fn to_conic(&self) -> Conic {
        let (s, c) = (math::sin(self.theta), math::cos(self.theta));
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let ca = c * c / a2 + s * s / b2;
        let cb = 2.0 * c * s * (1.0 / a2 - 1.0 / b2);
        let cc = s * s / a2 + c * c / b2;
        let cd = -2.0 * ca * self.cx - cb * self.cy;
        let ce = -cb * self.cx - 2.0 * cc * self.cy;
        let cf = ca * self.cx * self.cx + cb * self.cx * self.cy + cc * self.cy * self.cy - 1.0;
        Conic([ca, cb, cc, cd, ce, cf])
    }
}

impl Conic {
    pub fn eval(&self, p: Point) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * p.x * p.x + b * p.x * p.y + c * p.y * p.y + d * p.x + e * p.y + f
    }

    /// Geometric parameters, or `DegenerateFit` when the conic is not a real ellipse.
    pub fn to_ellipse(&self) -> Result<Ellipse> {
        let [mut a, mut b, mut c, mut d, mut e, mut f] = self.0;
        let den = 4.0 * a * c - b * b;
        if !(den > 0.0) {
            return Err(Error::DegenerateFit);
        }
        if a < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
            e = -e;
            f = -f;
        }
        let cx = (b * e - 2.0 * c * d) / den;
        let cy = (b * d - 2.0 * a * e) / den;
        let f0 = f + 0.5 * (d * cx + e * cy);
        if !(f0 < 0.0) {
            return Err(Error::DegenerateFit);
        }
        let (l_max, l_min, v_max) = linalg::sym2_eigen(a, 0.5 * b, c);
        if !(l_min > 0.0) {
            return Err(Error::DegenerateFit);
        }
        let major = math::sqrt(-f0 / l_min);
        let minor = math::sqrt(-f0 / l_max);
        // The major axis is orthogonal to the eigenvector of the larger eigenvalue.
        let theta = math::atan2(v_max[1], v_max[0]) + PI / 2.0;
        Ellipse::new(cx, cy, major, minor, theta).map_err(|_| Error::DegenerateFit)
    }
}

/// Weighted direct least-squares ellipse fit.
///
/// Minimizes `Σ w_j (conic residual at p_j)²` under `4AC − B² = 1`, using
/// the block decomposition of the scatter matrix into quadratic and linear
/// parts so only a 3×3 eigenproblem remains. Points are centered on their
/// weighted mean and scaled to unit RMS radius before fitting.
pub fn fit_ellipse_weighted(pts: &WeightedPoints) -> Result<Ellipse> {
    let n = pts.len();
    if n < 6 {
        return Err(Error::InsufficientPoints { needed: 6, got: n });
    }
    let w_sum: f64 = pts.weights().iter().sum();
    let (mut mx, mut my) = (0.0, 0.0);
    for (p, &w) in pts.points().iter().zip(pts.weights()) {
        mx += w * p.x;
        my += w * p.y;
    }
    mx /= w_sum;
    my /= w_sum;
    let mut spread = 0.0;
    for (p, &w) in pts.points().iter().zip(pts.weights()) {
        let (dx, dy) = (p.x - mx, p.y - my);
        spread += w * (dx * dx + dy * dy);
    }
    let scale = math::sqrt(spread / w_sum);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateFit);
    }

    // Quadratic block (x², xy, y²) and linear block (x, y, 1) scatter.
    let mut s1: Mat3 = [[0.0; 3]; 3];
    let mut s2: Mat3 = [[0.0; 3]; 3];
    let mut s3: Mat3 = [[0.0; 3]; 3];
    for (p, &w) in pts.points().iter().zip(pts.weights()) {
        let x = (p.x - mx) / scale;
        let y = (p.y - my) / scale;
        let quad = [x * x, x * y, y * y];
        let lin = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                s1[i][j] += w * quad[i] * quad[j];
                s2[i][j] += w * quad[i] * lin[j];
                s3[i][j] += w * lin[i] * lin[j];
            }
        }
    }
    let s3_inv = linalg::inv3(&s3).ok_or(Error::DegenerateFit)?;
    let mut t = linalg::mul3(&s3_inv, &linalg::transpose3(&s2));
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
    let s2t = linalg::mul3(&s2, &t);
    let mut reduced = s1;
    for i in 0..3 {
        for j in 0..3 {
            reduced[i][j] += s2t[i][j];
        }
    }
    // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
    let m: Mat3 = [
        [reduced[2][0] / 2.0, reduced[2][1] / 2.0, reduced[2][2] / 2.0],
        [-reduced[1][0], -reduced[1][1], -reduced[1][2]],
        [reduced[0][0] / 2.0, reduced[0][1] / 2.0, reduced[0][2] / 2.0],
    ];
    let (pairs, count) = linalg::eigen3(&m);
    let mut best: Option<([f64; 3], f64)> = None;
    for &(_, v) in pairs.iter().take(count) {
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if !(constraint > 0.0) {
            continue;
        }
        let cost = linalg::mat_vec3(&reduced, &v);
        let cost = (cost[0] * v[0] + cost[1] * v[1] + cost[2] * v[2]) / constraint;
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((v, cost));
        }
    }
    let (quad, _) = best.ok_or(Error::DegenerateFit)?;
    let lin = linalg::mat_vec3(&t, &quad);
    let local = Conic([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]]).to_ellipse()?;
    Ellipse::new(
        local.cx * scale + mx,
        local.cy * scale + my,
        local.a * scale,
        local.b * scale,
        local.theta,
    )
    .map_err(|_| Error::DegenerateFit)
}

// ── Pubic symphysis axis ───────────────────────────────────────────────────

/// Long axis of the pubic symphysis given by its two extreme pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsAxis {
    pub p_sup: Point,
    pub p_inf: Point,
}

/// Dominant eigenvector of the confidence-weighted covariance of the
/// component's pixel centers (unit length, sign unspecified).
pub fn principal_direction(comp: &Component, conf: &ConfMap) -> Result<Point> {
    let pixels = comp.pixels();
    let mut w_sum = 0.0;
    let (mut mx, mut my) = (0.0, 0.0);
    let mut weights = Vec::with_capacity(pixels.len());
    for &(r, c) in pixels {
        if r >= conf.height() || c >= conf.width() {
            return Err(Error::InvalidInput("PS pixel outside confidence map".into()));
        }
        let w = conf.get(r, c);
        let p = morphology::pixel_center((r, c));
        weights.push(w);
        w_sum += w;
        mx += w * p.x;
        my += w * p.y;
    }
    mx /= w_sum;
    my /= w_sum;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&px, &w) in pixels.iter().zip(&weights) {
        let p = morphology::pixel_center(px);
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    if !(sxx + syy > 0.0) {
        return Err(Error::DegenerateAxis);
    }
    let (_, _, dir) = linalg::sym2_eigen(sxx / w_sum, sxy / w_sum, syy / w_sum);
    Ok(Point::new(dir[0], dir[1]))
}

/// Principal axis of the confidence-weighted PS pixel cloud.
///
/// Endpoints are the pixel centers with extreme projections on the axis
/// (first in row-major order on ties); the one closer to `fh_centroid` is
/// the inferior endpoint.
pub fn ps_axis(comp: &Component, conf: &ConfMap, fh_centroid: Point) -> Result<PsAxis> {
    let pixels = comp.pixels();
    let dir = principal_direction(comp, conf)?;

    let mut lo = (f64::INFINITY, Point::default());
    let mut hi = (f64::NEG_INFINITY, Point::default());
    for &px in pixels {
        let p = morphology::pixel_center(px);
        let s = p.dot(dir);
        if s < lo.0 {
            lo = (s, p);
        }
        if s > hi.0 {
            hi = (s, p);
        }
    }
    let (a, b) = (lo.1, hi.1);
    if a == b {
        return Err(Error::DegenerateAxis);
    }
    if b.dist(fh_centroid) < a.dist(fh_centroid) {
        Ok(PsAxis { p_sup: a, p_inf: b })
    } else {
        Ok(PsAxis { p_sup: b, p_inf: a })
    }
}

// ── Tangents and the angle ─────────────────────────────────────────────────

/// The two points where lines through the exterior point `q` touch `e`.
///
/// The ellipse is mapped to the unit circle, where the tangency points of
/// `q' = (u, v)` with `r² = u² + v²` are `(u ∓ v√(r²−1), v ± u√(r²−1)) / r²`.
pub fn tangent_points(e: &Ellipse, q: Point) -> Result<(Point, Point)> {
    let u = e.to_unit(q);
    let r2 = u.x * u.x + u.y * u.y;
    if !(r2 > 1.0 + 1e-12) {
        return Err(Error::PointNotExterior);
    }
    let s = math::sqrt(r2 - 1.0);
    let t1 = Point::new((u.x - u.y * s) / r2, (u.y + u.x * s) / r2);
    let t2 = Point::new((u.x + u.y * s) / r2, (u.y - u.x * s) / r2);
    Ok((e.from_unit(t1), e.from_unit(t2)))
}

/// Picks the tangent point that opens the wider angle at `axis.p_inf`
/// against the ray to `axis.p_sup`. Equal angles fall back to the
/// lexicographically smaller point.
pub fn select_tangent(axis: &PsAxis, candidates: (Point, Point)) -> Point {
    let (t1, t2) = candidates;
    let a1 = angle_at(axis.p_inf, axis.p_sup, t1);
    let a2 = angle_at(axis.p_inf, axis.p_sup, t2);
    if (a1 - a2).abs() <= 1e-12 {
        if t2.lex_lt(t1) {
            t2
        } else {
            t1
        }
    } else if a1 > a2 {
        t1
    } else {
        t2
    }
}

/// Law of cosines: the angle opposite `d14`, in degrees.
pub fn aop_from_sides(d13: f64, d34: f64, d14: f64) -> Result<f64> {
    if !(d13 > 0.0 && d34 > 0.0 && d13.is_finite() && d34.is_finite()) {
        return Err(Error::InvalidTriangle);
    }
    if !(d14 >= 0.0 && d14.is_finite()) {
        return Err(Error::InvalidTriangle);
    }
    let cos = (d13 * d13 + d34 * d34 - d14 * d14) / (2.0 * d13 * d34);
    Ok(math::acos(cos.clamp(-1.0, 1.0)) * (180.0 / PI))
}

/// Mean confidence over `points`, read by nearest-pixel lookup.
///
/// Values are summed in ascending order so the result does not depend on
/// the order of the point set.
pub fn aop_confidence(points: &[Point], conf: &ConfMap) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty confidence sample set".into()));
    }
    let mut values = Vec::with_capacity(points.len());
    for p in points {
        let v = conf
            .sample(p.x, p.y)
            .ok_or_else(|| Error::InvalidInput("sample point outside confidence map".into()))?;
        values.push(v);
    }
    values.sort_unstable_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    Ok((sum + comp) / points.len() as f64)
}

/// Angle of progression and its confidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AopResult {
    pub aop_deg: f64,
    pub c_aop: f64,
    /// PS superior endpoint.
    pub p1: Point,
    /// PS inferior endpoint, the vertex of the angle.
    pub p3: Point,
    /// Tangent point on the fitted FH ellipse.
    pub p4: Point,
    pub d13: f64,
    pub d34: f64,
    pub d14: f64,
    pub ellipse: Ellipse,
    pub m_points: usize,
}

/// Full measurement pipeline from a label mask and a confidence map.
///
/// Side lengths are in pixel units; the spacing only has to be isotropic.
pub fn compute_aop(
    mask: &LabelMask,
    conf: &ConfMap,
    spacing: PixelSpacing,
) -> core::result::Result<AopResult, StageError> {
    if !spacing.is_isotropic() {
        return Err(StageError::new(Stage::Spacing, Error::AnisotropicSpacing));
    }
    if !mask.same_extent(conf.height(), conf.width()) {
        return Err(StageError::new(
            Stage::WeightedBoundary,
            Error::InvalidInput("mask and confidence extents differ".into()),
        ));
    }
    let ps = morphology::largest_component(mask, Class::Ps).at(Stage::LargestComponent)?;
    let fh = morphology::largest_component(mask, Class::Fh).at(Stage::LargestComponent)?;
    let ps_boundary = morphology::boundary_points(&ps, mask);
    let fh_boundary = morphology::boundary_points(&fh, mask);
    let fh_points = morphology::weighted_boundary(&fh_boundary, conf).at(Stage::WeightedBoundary)?;
    let ps_points = morphology::weighted_boundary(&ps_boundary, conf).at(Stage::WeightedBoundary)?;

    let ellipse = fit_ellipse_weighted(&fh_points).at(Stage::FitEllipse)?;
    let axis = ps_axis(&ps, conf, fh.centroid()).at(Stage::PsAxis)?;
    let candidates = tangent_points(&ellipse, axis.p_inf).at(Stage::TangentPoints)?;
    let p4 = select_tangent(&axis, candidates);

    let (p1, p3) = (axis.p_sup, axis.p_inf);
    let d13 = p1.dist(p3);
    let d34 = p3.dist(p4);
    let d14 = p1.dist(p4);
    let aop_deg = aop_from_sides(d13, d34, d14).at(Stage::AopFromSides)?;

    let mut samples = Vec::with_capacity(ps_points.len() + fh_points.len());
    samples.extend_from_slice(ps_points.points());
    samples.extend_from_slice(fh_points.points());
    let c_aop = aop_confidence(&samples, conf).at(Stage::AopConfidence)?;

    Ok(AopResult { aop_deg, c_aop, p1, p3, p4, d13, d34, d14, ellipse, m_points: samples.len() })
}
