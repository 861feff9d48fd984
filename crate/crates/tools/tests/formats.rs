use aop_core::raster::{ConfMap, LabelMask, LogitMap};
use aop_tools::f32r::{self, F32r};
use aop_tools::pgm::{read_mask_pgm, write_mask_pgm};
use proptest::prelude::*;

fn mask() -> impl Strategy<Value = LabelMask> {
    (1usize..=40, 1usize..=40).prop_flat_map(|(h, w)| {
        prop::collection::vec(0u8..=2, h * w).prop_map(move |v| LabelMask::new(h, w, v).unwrap())
    })
}

fn f32r_raster() -> impl Strategy<Value = F32r> {
    (1usize..=3, 1usize..=20, 1usize..=20).prop_flat_map(|(c, h, w)| {
        let not_nan = any::<f32>().prop_filter("NaN is not storable", |v| !v.is_nan());
        prop::collection::vec(not_nan, c * h * w).prop_map(move |values| F32r { channels: c, height: h, width: w, values })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pgm_round_trips(m in mask()) {
        let bytes = write_mask_pgm(&m);
        let back = read_mask_pgm(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_mask_pgm(&back), bytes);
    }

    #[test]
    fn f32r_round_trips_bit_exactly(r in f32r_raster()) {
        let bytes = f32r::write_f32r(&r);
        let back = f32r::read_f32r(&bytes).unwrap();
        prop_assert_eq!(back.values.len(), r.values.len());
        for (a, b) in back.values.iter().zip(&r.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(f32r::write_f32r(&back), bytes);
    }

    #[test]
    fn narrowed_maps_are_stable_after_one_trip(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let mut rng = aop_core::rng::SplitMix64::new(seed);
        let conf = ConfMap::clamped(h, w, (0..h * w).map(|_| rng.next_f64()).collect()).unwrap();
        let logits = LogitMap::new(h, w, (0..3 * h * w).map(|_| rng.uniform(-20.0, 20.0)).collect()).unwrap();
        let cb = f32r::write_conf(&conf);
        prop_assert_eq!(f32r::write_conf(&f32r::read_conf(&cb).unwrap()), cb);
        let lb = f32r::write_logits(&logits);
        prop_assert_eq!(f32r::write_logits(&f32r::read_logits(&lb).unwrap()), lb);
    }

    #[test]
    fn truncation_is_always_rejected(m in mask(), cut in 1usize..8) {
        let bytes = write_mask_pgm(&m);
        let cut = cut.min(bytes.len());
        prop_assert!(read_mask_pgm(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn two_by_two_mask_file_layout() {
    let m = LabelMask::new(2, 2, vec![0, 1, 2, 0]).unwrap();
    assert_eq!(write_mask_pgm(&m), b"P5\n2 2\n255\n\x00\x01\x02\x00");
}

#[test]
fn channel_count_picks_the_map_kind() {
    let conf = ConfMap::uniform(2, 3, 0.25).unwrap();
    assert!(matches!(f32r::read_raster(&f32r::write_conf(&conf)).unwrap(), f32r::Raster::Conf(_)));
    let two = f32r::write_f32r(&F32r { channels: 2, height: 1, width: 1, values: vec![0.0, 0.0] });
    assert!(f32r::read_raster(&two).is_err());
    assert!(f32r::read_logits(&f32r::write_conf(&conf)).is_err());
}
