//! Connected components and boundary extraction.
//!
//! Components are 8-connected; the boundary test uses the 4-neighborhood,
//! and pixels on the image border always count as boundary.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::raster::{Class, ConfMap, LabelMask};

/// `(row, col)` pixel index.
pub type Pixel = (usize, usize);

/// One 8-connected region of a single foreground class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    class: Class,
    /// Row-major sorted.
    pixels: Vec<Pixel>,
}

impl Component {
    pub fn class(&self) -> Class {
        self.class
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    /// Row-major first pixel, which is also the flood-fill seed.
    pub fn seed(&self) -> Pixel {
        self.pixels[0]
    }

    /// Unweighted mean of the pixel centers.
    pub fn centroid(&self) -> Point {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self.pixels.iter().fold((0.0, 0.0), |(sx, sy), &(r, c)| {
            (sx + c as f64 + 0.5, sy + r as f64 + 0.5)
        });
        Point::new(sx / n, sy / n)
    }
}

/// Boundary samples paired with their confidence weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl WeightedPoints {
    /// Requires a nonempty set, matching lengths and weights in (0, 1].
    ///
    /// Unit weights are accepted so that unweighted fits share this type.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty point set".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::InvalidInput(format!("weight {w} outside (0,1]")));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidInput("non-finite point".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn unit(points: Vec<Point>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const NEIGHBORS8: [(isize, isize); 8] =
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
const NEIGHBORS4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

fn foreground(class: Class) -> Result<Class> {
    if class == Class::Background {
        return Err(Error::InvalidInput("components are only defined for PS and FH".into()));
    }
    Ok(class)
}

#[inline]
fn offset(mask: &LabelMask, (r, c): Pixel, (dr, dc): (isize, isize)) -> Option<Pixel> {
    let nr = r.checked_add_signed(dr)?;
    let nc = c.checked_add_signed(dc)?;
    (nr < mask.height() && nc < mask.width()).then_some((nr, nc))
}

/// All 8-connected components of `class`, in order of their row-major seed.
pub fn components(mask: &LabelMask, class: Class) -> Result<Vec<Component>> {
    let class = foreground(class)?;
    let (h, w) = (mask.height(), mask.width());
    let id = class.id();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if seen[r * w + c] || mask.get(r, c) != id {
                continue;
            }
            seen[r * w + c] = true;
            queue.push_back((r, c));
            let mut pixels = Vec::new();
            while let Some(p) = queue.pop_front() {
                pixels.push(p);
                for d in NEIGHBORS8 {
                    if let Some((nr, nc)) = offset(mask, p, d) {
                        let k = nr * w + nc;
                        if !seen[k] && mask.get(nr, nc) == id {
                            seen[k] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            pixels.sort_unstable();
            out.push(Component { class, pixels });
        }
    }
    Ok(out)
}

/// The component of `class` with the most pixels; equal sizes resolve to
/// the lexicographically smallest seed.
pub fn largest_component(mask: &LabelMask, class: Class) -> Result<Component> {
    let mut best: Option<Component> = None;
    for comp in components(mask, class)? {
        // Components arrive in seed order, so strict `>` keeps the earliest seed on ties.
        if best.as_ref().is_none_or(|b| comp.pixel_count() > b.pixel_count()) {
            best = Some(comp);
        }
    }
    best.ok_or(Error::MissingStructure(class))
}

/// Pixels of `comp` with a 4-neighbor outside the image or of another class,
/// in row-major order.
pub fn boundary_points(comp: &Component, mask: &LabelMask) -> Vec<Pixel> {
    let id = comp.class.id();
    comp.pixels
        .iter()
        .copied()
        .filter(|&p| {
            NEIGHBORS4
                .iter()
                .any(|&d| offset(mask, p, d).is_none_or(|(r, c)| mask.get(r, c) != id))
        })
        .collect()
}

/// Boundary pixels of the region whose labels satisfy `member`.
///
/// Same 4-neighborhood rule as [`boundary_points`], applied to an arbitrary
/// class set (the merged PS+FH region, for instance).
pub fn region_boundary(mask: &LabelMask, member: impl Fn(u8) -> bool) -> Vec<Pixel> {
    let mut out = Vec::new();
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if !member(mask.get(r, c)) {
                continue;
            }
            let edge = NEIGHBORS4
                .iter()
                .any(|&d| offset(mask, (r, c), d).is_none_or(|(nr, nc)| !member(mask.get(nr, nc))));
            if edge {
                out.push((r, c));
            }
        }
    }
    out
}

#[inline]
pub fn pixel_center((r, c): Pixel) -> Point {
    Point::new(c as f64 + 0.5, r as f64 + 0.5)
}

/// Pixel centers of `bpts` weighted by the confidence at each pixel.
pub fn weighted_boundary(bpts: &[Pixel], conf: &ConfMap) -> Result<WeightedPoints> {
    let mut points = Vec::with_capacity(bpts.len());
    let mut weights = Vec::with_capacity(bpts.len());
    for &(r, c) in bpts {
        if r >= conf.height() || c >= conf.width() {
            return Err(Error::InvalidInput(format!(
                "boundary pixel ({r},{c}) outside {}x{} confidence map",
                conf.height(),
                conf.width()
            )));
        }
        points.push(pixel_center((r, c)));
        weights.push(conf.get(r, c));
    }
    WeightedPoints::new(points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> LabelMask {
        let h = rows.len();
        let w = rows[0].len();
        let labels = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b - b'0'))
            .collect();
        LabelMask::new(h, w, labels).unwrap()
    }

    fn block(h: usize, w: usize, r0: usize, c0: usize, bh: usize, bw: usize, class: Class) -> LabelMask {
        let mut m = LabelMask::empty(h, w).unwrap();
        for r in r0..r0 + bh {
            for c in c0..c0 + bw {
                m.set(r, c, class);
            }
        }
        m
    }

    // Brute-force reference: a pixel is interior iff all four neighbors exist
    // and share its class.
    fn brute_boundary(mask: &LabelMask, pixels: &[Pixel]) -> Vec<Pixel> {
        let (h, w) = (mask.height() as i64, mask.width() as i64);
        let mut out = Vec::new();
        for &(r, c) in pixels {
            let id = mask.get(r, c);
            let (ri, ci) = (r as i64, c as i64);
            let mut interior = true;
            for (nr, nc) in [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)] {
                if nr < 0 || nc < 0 || nr >= h || nc >= w || mask.get(nr as usize, nc as usize) != id {
                    interior = false;
                }
            }
            if !interior {
                out.push((r, c));
            }
        }
        out
    }

    #[test]
    fn largest_picks_bigger_blob() {
        let m = mask_from(&[
            "1100000", //
            "1110000",
            "0000011",
            "0000010",
        ]);
        let comp = largest_component(&m, Class::Ps).unwrap();
        assert_eq!(comp.pixel_count(), 5);
        assert_eq!(comp.seed(), (0, 0));
    }

    #[test]
    fn missing_class_is_reported() {
        let m = mask_from(&["110", "000"]);
        assert_eq!(largest_component(&m, Class::Fh), Err(Error::MissingStructure(Class::Fh)));
        assert!(largest_component(&m, Class::Background).is_err());
    }

    #[test]
    fn equal_size_tie_goes_to_smallest_seed() {
        let mut m = block(8, 8, 0, 0, 2, 2, Class::Fh);
        for (r, c) in [(5, 5), (5, 6), (6, 5), (6, 6)] {
            m.set(r, c, Class::Fh);
        }
        let comp = largest_component(&m, Class::Fh).unwrap();
        assert_eq!(comp.seed(), (0, 0));
        assert_eq!(comp.pixel_count(), 4);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let m = mask_from(&["100", "010", "001"]);
        assert_eq!(components(&m, Class::Ps).unwrap().len(), 1);
    }

    #[test]
    fn boundary_single_pixel_and_blocks() {
        let m = block(5, 5, 2, 2, 1, 1, Class::Ps);
        let comp = largest_component(&m, Class::Ps).unwrap();
        assert_eq!(boundary_points(&comp, &m), vec![(2, 2)]);

        let m = block(7, 7, 2, 2, 3, 3, Class::Fh);
        let comp = largest_component(&m, Class::Fh).unwrap();
        let b = boundary_points(&comp, &m);
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&(3, 3)));
    }

    #[test]
    fn boundary_of_10x10_block_matches_brute_force() {
        let m = block(16, 16, 3, 4, 10, 10, Class::Fh);
        let comp = largest_component(&m, Class::Fh).unwrap();
        let expected = brute_boundary(&m, comp.pixels());
        assert_eq!(expected.len(), 36);
        assert_eq!(boundary_points(&comp, &m), expected);
    }

    #[test]
    fn border_pixels_count_as_boundary() {
        let m = block(3, 3, 0, 0, 3, 3, Class::Fh);
        let comp = largest_component(&m, Class::Fh).unwrap();
        assert_eq!(boundary_points(&comp, &m).len(), 8);
        let full = block(4, 4, 0, 0, 4, 4, Class::Ps);
        let comp = largest_component(&full, Class::Ps).unwrap();
        assert_eq!(boundary_points(&comp, &full).len(), 12);
    }

    #[test]
    fn weighted_boundary_uniform_and_checkerboard() {
        let m = block(6, 6, 1, 1, 3, 3, Class::Fh);
        let comp = largest_component(&m, Class::Fh).unwrap();
        let b = boundary_points(&comp, &m);

        let conf = ConfMap::uniform(6, 6, 0.5).unwrap();
        let wp = weighted_boundary(&b, &conf).unwrap();
        assert_eq!(wp.weights(), &[0.5; 8]);
        assert_eq!(wp.points()[0], Point::new(1.5, 1.5));

        let vals = (0..36).map(|i| if (i / 6 + i % 6) % 2 == 0 { 0.2 } else { 0.8 }).collect();
        let checker = ConfMap::new(6, 6, vals).unwrap();
        let wp = weighted_boundary(&b, &checker).unwrap();
        for (&(r, c), &w) in b.iter().zip(wp.weights()) {
            let expected = if (r + c) % 2 == 0 { 0.2 } else { 0.8 };
            assert_eq!(w, expected);
        }
    }

    #[test]
    fn weighted_boundary_extent_mismatch() {
        let conf = ConfMap::uniform(2, 2, 0.5).unwrap();
        assert!(matches!(weighted_boundary(&[(3, 0)], &conf), Err(Error::InvalidInput(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_mask() -> impl Strategy<Value = LabelMask> {
            (1usize..=32, 1usize..=32).prop_flat_map(|(h, w)| {
                proptest::collection::vec(0u8..3, h * w)
                    .prop_map(move |labels| LabelMask::new(h, w, labels).unwrap())
            })
        }

        // Independent recursive flood fill used as the partition oracle.
        fn flood(mask: &LabelMask, id: u8, r: usize, c: usize, tag: usize, out: &mut [usize]) {
            let w = mask.width();
            let mut stack = vec![(r, c)];
            while let Some((r, c)) = stack.pop() {
                if out[r * w + c] != 0 || mask.get(r, c) != id {
                    continue;
                }
                out[r * w + c] = tag;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr >= 0 && nc >= 0 && (nr as usize) < mask.height() && (nc as usize) < w {
                            stack.push((nr as usize, nc as usize));
                        }
                    }
                }
            }
        }

        fn rotate180(m: &LabelMask) -> LabelMask {
            let mut labels = m.labels().to_vec();
            labels.reverse();
            LabelMask::new(m.height(), m.width(), labels).unwrap()
        }

        proptest! {
            #[test]
            fn components_partition_class_pixels(mask in arb_mask(), fh in any::<bool>()) {
                let class = if fh { Class::Fh } else { Class::Ps };
                let comps = components(&mask, class).unwrap();
                let w = mask.width();
                let mut tags = vec![0usize; mask.labels().len()];
                let mut n = 0;
                for r in 0..mask.height() {
                    for c in 0..w {
                        if tags[r * w + c] == 0 && mask.get(r, c) == class.id() {
                            n += 1;
                            flood(&mask, class.id(), r, c, n, &mut tags);
                        }
                    }
                }
                prop_assert_eq!(comps.len(), n);
                let mut owner = vec![usize::MAX; mask.labels().len()];
                for (k, comp) in comps.iter().enumerate() {
                    let tag = tags[comp.seed().0 * w + comp.seed().1];
                    for &(r, c) in comp.pixels() {
                        prop_assert_eq!(owner[r * w + c], usize::MAX);
                        owner[r * w + c] = k;
                        prop_assert_eq!(tags[r * w + c], tag);
                    }
                }
                let covered = owner.iter().filter(|&&o| o != usize::MAX).count();
                prop_assert_eq!(covered, mask.count(class));
            }

            #[test]
            fn boundary_subset_and_no_interior(mask in arb_mask()) {
                if let Ok(comp) = largest_component(&mask, Class::Fh) {
                    let b = boundary_points(&comp, &mask);
                    prop_assert_eq!(&b, &brute_boundary(&mask, comp.pixels()));
                    for p in &b {
                        prop_assert!(comp.pixels().binary_search(p).is_ok());
                    }
                }
            }

            #[test]
            fn largest_component_stable_under_double_rotation(mask in arb_mask()) {
                let back = rotate180(&rotate180(&mask));
                let a = largest_component(&mask, Class::Ps);
                let b = largest_component(&back, Class::Ps);
                prop_assert_eq!(a, b);
                // A single 180° rotation keeps the same pixel set when the
                // largest size is unique.
                let comps = components(&mask, Class::Ps).unwrap();
                if let Some(max) = comps.iter().map(|c| c.pixel_count()).max() {
                    if comps.iter().filter(|c| c.pixel_count() == max).count() == 1 {
                        let rot = largest_component(&rotate180(&mask), Class::Ps).unwrap();
                        let (h, w) = (mask.height(), mask.width());
                        let mut mapped: Vec<Pixel> =
                            rot.pixels().iter().map(|&(r, c)| (h - 1 - r, w - 1 - c)).collect();
                        mapped.sort_unstable();
                        let orig = largest_component(&mask, Class::Ps).unwrap();
                        prop_assert_eq!(mapped, orig.pixels().to_vec());
                    }
                }
            }
        }
    }
}
