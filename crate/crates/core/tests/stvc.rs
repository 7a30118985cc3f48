use std::path::PathBuf;

use i2vc::stvc::{
    analysis, bottleneck_dims, decode_feature, encode_feature, quantize, stage_gain, stage_mask, RateParam,
    StvcWeights, ALPHABET_BOUND,
};
use i2vc::LatentFeature;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn field(dims: (usize, usize, usize), seed: u64, amp: f64) -> LatentFeature {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatentFeature::from_fn(dims, |_, _, _| rng.random_range(-amp..amp))
}

#[test]
fn weight_snapshot_matches_fixture() {
    let w = StvcWeights::new(4, 0).unwrap();
    let path = fixture("weights_c4_s0.bin");
    if std::env::var_os("I2VC_BLESS").is_some() {
        std::fs::write(&path, w.to_snapshot()).unwrap();
    }
    let golden = std::fs::read(&path).expect("weight snapshot fixture");
    assert_eq!(w.to_snapshot(), golden);
    assert_eq!(StvcWeights::from_snapshot(&golden).unwrap().flatten(), w.flatten());
}

#[test]
fn default_weights_are_stable() {
    let snap = StvcWeights::new(48, 0).unwrap().to_snapshot();
    let digest = Sha256::digest(&snap);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let path = fixture("weights_c48_s0.sha256");
    if std::env::var_os("I2VC_BLESS").is_some() {
        std::fs::write(&path, format!("{hex}\n")).unwrap();
    }
    assert_eq!(hex, std::fs::read_to_string(&path).unwrap().trim());
}

#[test]
fn encode_decode_is_deterministic_and_bounded() {
    let w = StvcWeights::new(48, 2).unwrap();
    let rate = RateParam::new(128.0).unwrap();
    let y = field((48, 6, 10), 1, 1.0);
    let r = field((48, 6, 10), 2, 1.0);
    let (s, omega) = encode_feature(&y, Some(&r), rate, &w).unwrap();
    assert_eq!(s.dims(), bottleneck_dims(y.dims()));
    assert_eq!(s.dims(), (768, 2, 3));
    assert!(s.data().iter().all(|v| v.abs() <= ALPHABET_BOUND));
    assert!(omega.feature().data().iter().all(|m| (0.0..=1.0).contains(m)));
    let (a, _) = decode_feature(&s, Some(&r), (6, 10), rate, &w).unwrap();
    let (b, _) = decode_feature(&s, Some(&r), (6, 10), rate, &w).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dims(), y.dims());
}

#[test]
fn quantisation_error_shrinks_with_rate() {
    let w = StvcWeights::new(48, 0).unwrap();
    let y = field((48, 8, 8), 3, 1.0);
    let err = |lambda: f64| {
        let rate = RateParam::new(lambda).unwrap();
        let (s, _) = encode_feature(&y, None, rate, &w).unwrap();
        let (y_hat, _) = decode_feature(&s, None, (8, 8), rate, &w).unwrap();
        y_hat.sub(&y).unwrap().norm_l2()
    };
    let (lo, hi) = (err(8.0), err(512.0));
    assert!(hi < lo, "error at λ=512 ({hi}) not below λ=8 ({lo})");
}

#[test]
fn tie_rounding_is_away_from_zero() {
    let x = LatentFeature::from_vec(1, 1, 6, vec![0.5, -0.5, 1.5, -2.5, 200.0, -200.0]).unwrap();
    let q = quantize(&x);
    assert_eq!(q.data(), &[1, -1, 2, -3, 127, -127]);
    assert_eq!(q.saturated(), 2);
}

proptest! {
    #[test]
    fn masks_lie_in_unit_interval(seed in any::<u64>(), amp in 0.0f64..100.0, k in 0usize..4) {
        let w = StvcWeights::new(8, seed).unwrap();
        let p = w.stage(k);
        let f = field((p.channels, 3, 3), seed ^ 1, amp);
        let r = field((p.channels, 3, 3), seed ^ 2, amp);
        let m = stage_mask(p, &f, &r);
        prop_assert!(m.feature().data().iter().all(|v| (0.0..=1.0).contains(v)));
        let (_, om) = analysis(&field((8, 4, 4), seed, amp), None, RateParam::new(64.0).unwrap(), &w).unwrap();
        prop_assert!(om.feature().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn gain_is_positive_and_monotone_in_rate(
        seed in any::<u64>(),
        omega in 0.0f64..=1.0,
        l1 in 8.0f64..=512.0,
        l2 in 8.0f64..=512.0,
        k in 0usize..4,
    ) {
        let w = StvcWeights::new(4, seed).unwrap();
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let g = |l: f64| stage_gain(w.stage(k), omega, RateParam::new(l).unwrap(), w.gamma);
        prop_assert!(g(lo) > 0.0);
        prop_assert!(g(lo) <= g(hi));
    }
}
