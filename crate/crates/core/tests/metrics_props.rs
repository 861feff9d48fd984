use aop_core::metrics::{asd, case_metrics, dice, hd_percentile, surface_distances, ClassSet};
use aop_core::raster::{LabelMask, PixelSpacing};
use aop_core::Error;
use proptest::prelude::*;

/// Blobby masks: a few random rectangles of PS and FH on background.
fn mask_pair() -> impl Strategy<Value = (LabelMask, LabelMask)> {
    (1usize..=32, 1usize..=32).prop_flat_map(|(h, w)| {
        let labels = prop::collection::vec(prop_oneof![6 => Just(0u8), 2 => Just(1u8), 2 => Just(2u8)], h * w);
        (labels.clone(), labels).prop_map(move |(a, b)| (LabelMask::new(h, w, a).unwrap(), LabelMask::new(h, w, b).unwrap()))
    })
}

fn spacing() -> impl Strategy<Value = PixelSpacing> {
    (0.1..3.0f64, 0.1..3.0f64).prop_map(|(r, c)| PixelSpacing::new(r, c).unwrap())
}

fn boundary(m: &LabelMask, set: ClassSet) -> Vec<(usize, usize)> {
    let (h, w) = (m.height(), m.width());
    let inside = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && set.contains(m.get(r as usize, c as usize))
    };
    let mut out = Vec::new();
    for r in 0..h as isize {
        for c in 0..w as isize {
            if inside(r, c) && [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(dr, dc)| !inside(r + dr, c + dc)) {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

/// All-pairs minimum distance, both directions, sorted.
fn brute_distances(a: &LabelMask, b: &LabelMask, set: ClassSet, s: PixelSpacing) -> Option<Vec<f64>> {
    let (pa, pb) = (boundary(a, set), boundary(b, set));
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let d = |p: (usize, usize), q: (usize, usize)| {
        let dy = (p.0 as f64 - q.0 as f64) * s.row_mm;
        let dx = (p.1 as f64 - q.1 as f64) * s.col_mm;
        (dy * dy + dx * dx).sqrt()
    };
    let nearest = |p, set: &[(usize, usize)]| set.iter().map(|&q| d(p, q)).fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = pa.iter().map(|&p| nearest(p, &pb)).chain(pb.iter().map(|&p| nearest(p, &pa))).collect();
    out.sort_by(f64::total_cmp);
    Some(out)
}

fn brute_dice(a: &LabelMask, b: &LabelMask, set: ClassSet) -> f64 {
    let ina = a.labels().iter().filter(|&&l| set.contains(l)).count();
    let inb = b.labels().iter().filter(|&&l| set.contains(l)).count();
    let both = a.labels().iter().zip(b.labels()).filter(|(&x, &y)| set.contains(x) && set.contains(y)).count();
    if ina + inb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (ina + inb) as f64
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dice_is_symmetric_and_bounded((a, b) in mask_pair()) {
        for set in ClassSet::ALL {
            let ab = dice(&a, &b, set).unwrap();
            prop_assert_eq!(ab, dice(&b, &a, set).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(dice(&a, &a, set).unwrap(), 1.0);
        }
    }

    #[test]
    fn distance_multiset_is_swap_symmetric((a, b) in mask_pair(), s in spacing()) {
        for set in ClassSet::ALL {
            match (surface_distances(&a, &b, set, s), surface_distances(&b, &a, set, s)) {
                (Ok(x), Ok(y)) => prop_assert_eq!(sorted(x), sorted(y)),
                (Err(Error::EmptyStructure), Err(Error::EmptyStructure)) => {}
                other => prop_assert!(false, "asymmetric outcome {:?}", other),
            }
        }
    }

    #[test]
    fn percentiles_order_and_bound_the_mean(d in prop::collection::vec(0.0..100.0f64, 1..200), q1 in 0.1..100.0f64, q2 in 0.1..100.0f64) {
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(hd_percentile(&d, 100.0).unwrap(), max);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(hd_percentile(&d, lo).unwrap() <= hd_percentile(&d, hi).unwrap());
        prop_assert!(asd(&d).unwrap() <= max * (1.0 + 1e-15));
    }

    #[test]
    fn metrics_equal_brute_force_on_small_masks((a, b) in mask_pair(), s in spacing()) {
        for set in ClassSet::ALL {
            prop_assert!((dice(&a, &b, set).unwrap() - brute_dice(&a, &b, set)).abs() <= 1e-12);
            match (surface_distances(&a, &b, set, s), brute_distances(&a, &b, set, s)) {
                (Ok(fast), Some(slow)) => {
                    let fast = sorted(fast);
                    prop_assert_eq!(fast.len(), slow.len());
                    for (x, y) in fast.iter().zip(&slow) {
                        prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
                    }
                    let n = slow.len() as f64;
                    prop_assert!((asd(&fast).unwrap() - slow.iter().sum::<f64>() / n).abs() <= 1e-12);
                    prop_assert_eq!(hd_percentile(&fast, 100.0).unwrap(), *slow.last().unwrap());
                }
                (Err(Error::EmptyStructure), None) => {}
                other => prop_assert!(false, "outcome mismatch {:?}", other),
            }
        }
    }

    #[test]
    fn identical_masks_score_perfectly((a, _) in mask_pair(), s in spacing()) {
        let m = case_metrics("x", &a, &a, s, None).unwrap();
        for v in [m.dice_psfh, m.dice_ps, m.dice_fh] {
            prop_assert_eq!(v, Some(1.0));
        }
        for v in [m.asd_psfh, m.asd_ps, m.asd_fh, m.hd100_psfh, m.hd100_ps, m.hd100_fh].into_iter().flatten() {
            prop_assert_eq!(v, 0.0);
        }
    }
}
