use aop_core::raster::{softmax, ConfMap, LogitMap, ProbMap};
use aop_core::rng::SplitMix64;
use aop_core::tta::{
    adapt, aop_conf_loss, apply_head, entropy_loss, grad_ent_tv, tv_loss, AdaptParams, TrainableMask, TtaConfig,
    TtaSample, NUM_PARAMS,
};
use proptest::prelude::*;

fn logit_map() -> impl Strategy<Value = LogitMap> {
    (2usize..=16, 2usize..=16).prop_flat_map(|(h, w)| {
        prop::collection::vec(-10.0..10.0f64, 3 * h * w).prop_map(move |v| LogitMap::new(h, w, v).unwrap())
    })
}

/// Straight double loop over every anchor, written independently.
fn tv_brute(p: &ProbMap) -> f64 {
    let (h, w) = (p.height(), p.width());
    let mut total = 0.0;
    for c in 0..3 {
        for i in 0..h {
            for j in 0..w {
                if i + 1 < h && j + 1 < w {
                    total += (p.get(c, i + 1, j) - p.get(c, i, j)).abs();
                    total += (p.get(c, i, j + 1) - p.get(c, i, j)).abs();
                }
            }
        }
    }
    total / (h * w) as f64
}

fn permute(p: &ProbMap, perm: [usize; 3]) -> ProbMap {
    let plane = p.plane();
    let mut v = vec![0.0; 3 * plane];
    for c in 0..3 {
        v[perm[c] * plane..(perm[c] + 1) * plane].copy_from_slice(&p.values()[c * plane..(c + 1) * plane]);
    }
    ProbMap::new(p.height(), p.width(), v).unwrap()
}

proptest! {
    #[test]
    fn entropy_is_bounded(z in logit_map()) {
        let e = entropy_loss(&[softmax(&z)]).unwrap();
        prop_assert!((0.0..=3f64.ln() + 1e-12).contains(&e));
    }

    #[test]
    fn tv_matches_double_loop(z in logit_map()) {
        let p = softmax(&z);
        let tv = tv_loss(std::slice::from_ref(&p)).unwrap();
        prop_assert!(tv >= 0.0);
        prop_assert!((tv - tv_brute(&p)).abs() <= 1e-12);
    }

    #[test]
    fn tv_ignores_class_order(z in logit_map(), k in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = softmax(&z);
        let a = tv_loss(std::slice::from_ref(&p)).unwrap();
        let b = tv_loss(&[permute(&p, perms[k])]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn confidence_loss_is_strictly_decreasing(a in 1e-6..0.999f64, d in 1e-6..0.5f64) {
        let b = (a + d).min(1.0);
        prop_assume!(b > a);
        prop_assert!(aop_conf_loss(b, 1e-6) < aop_conf_loss(a, 1e-6));
    }

    #[test]
    fn identity_head_is_bit_exact(z in logit_map()) {
        let out = apply_head(&z, &AdaptParams::identity()).unwrap();
        let bits = |m: &LogitMap| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&out), bits(&z));
    }

    #[test]
    fn frozen_adaptation_is_the_identity(z in logit_map(), lr in 0.0..10.0f64) {
        let (h, w) = (z.height(), z.width());
        let s = [TtaSample::new(z, ConfMap::uniform(h, w, 0.5).unwrap()).unwrap()];
        let p0 = AdaptParams::identity().with_trainable(TrainableMask::NONE);
        let cfg = TtaConfig { lr, ..TtaConfig::default() };
        let (p, _) = adapt(&s, &p0, &cfg).unwrap();
        prop_assert_eq!(p.to_array().map(f64::to_bits), p0.to_array().map(f64::to_bits));
    }
}

fn objective(s: &[TtaSample], p: &AdaptParams, cfg: &TtaConfig) -> f64 {
    let probs: Vec<ProbMap> = s.iter().map(|x| softmax(&apply_head(&x.logits, p).unwrap())).collect();
    cfg.lambda_ent * entropy_loss(&probs).unwrap() + cfg.lambda_tv * tv_loss(&probs).unwrap()
}

/// Worst relative error between the analytic gradient and central
/// differences over 100 seeded 8x8 instances with perturbed parameters.
#[test]
fn gradient_matches_finite_differences_on_seeded_instances() {
    let cfg = TtaConfig::default();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = SplitMix64::new(seed);
        let z = LogitMap::new(8, 8, (0..192).map(|_| rng.uniform(-10.0, 10.0)).collect()).unwrap();
        let s = [TtaSample::new(z, ConfMap::uniform(8, 8, 0.5).unwrap()).unwrap()];
        let mut p = AdaptParams::identity();
        for k in 0..NUM_PARAMS {
            p.set(k, p.get(k) + rng.uniform(-0.2, 0.2));
        }
        let a = grad_ent_tv(&s, &p, &cfg).unwrap();
        for k in 0..NUM_PARAMS {
            let (mut up, mut down) = (p, p);
            up.set(k, p.get(k) + h);
            down.set(k, p.get(k) - h);
            let n = (objective(&s, &up, &cfg) - objective(&s, &down, &cfg)) / (2.0 * h);
            let rel = (a.0[k] - n).abs() / a.0[k].abs().max(n.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}
