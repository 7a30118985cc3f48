use std::path::PathBuf;

use i2vc::entropy::{
    context_params, estimate_rate, range_decode, range_encode, Bitpayload, SymbolDistribution, SymbolModel,
    PROB_TOTAL, SIGMA_MIN,
};
use i2vc::stvc::{RateParam, StvcWeights, ALPHABET_BOUND};
use i2vc::LatentFeature;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Frequency table over the whole alphabet, built without the coder's
/// windowing: one frequency unit per symbol, `floor(mass · spare)` on top,
/// and the leftover on the bin nearest the mean.
fn reference_freqs(bound: i32, mean: f64, scale: f64) -> Vec<u32> {
    let scale = scale.max(SIGMA_MIN);
    let alphabet = (2 * bound + 1) as u32;
    let spare = (PROB_TOTAL - alphabet) as f64;
    let k = 1.0 / (scale * std::f64::consts::SQRT_2);
    let cdf_above = |x: f64| 0.5 * libm::erfc((x - mean) * k);
    let mut f: Vec<u32> = (-bound..=bound)
        .map(|s| {
            let lo = if s == -bound { 1.0 } else { cdf_above(s as f64 - 0.5) };
            let hi = if s == bound { 0.0 } else { cdf_above(s as f64 + 0.5) };
            1 + libm::floor((lo - hi).max(0.0) * spare) as u32
        })
        .collect();
    let total: u32 = f.iter().sum();
    let mode = (libm::round(mean).clamp(-bound as f64, bound as f64) as i32 + bound) as usize;
    f[mode] += PROB_TOTAL - total;
    f
}

#[test]
fn frequencies_match_full_alphabet_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let mean = rng.random_range(-140.0..140.0);
        let scale = libm::exp(rng.random_range(-3.0..4.0));
        let d = SymbolDistribution::new(ALPHABET_BOUND, vec![mean], vec![scale]);
        let want = reference_freqs(ALPHABET_BOUND, mean, scale);
        let mut cum = 0;
        for (i, s) in (-ALPHABET_BOUND..=ALPHABET_BOUND).enumerate() {
            assert_eq!(d.interval(0, s), (cum, want[i]), "mean {mean} scale {scale} symbol {s}");
            cum += want[i];
        }
    }
}

#[test]
fn golden_payload_decodes_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x601d);
    let n = 512;
    let means: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let scales: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..6.0)).collect();
    let symbols: Vec<i32> = means
        .iter()
        .map(|m| (libm::round(*m) as i32 + rng.random_range(-3..=3)).clamp(-ALPHABET_BOUND, ALPHABET_BOUND))
        .collect();
    let d = SymbolDistribution::new(ALPHABET_BOUND, means, scales);
    let path = fixture("golden_payload.bin");
    if std::env::var_os("I2VC_BLESS").is_some() {
        std::fs::write(&path, range_encode(&symbols, &d).unwrap().bytes).unwrap();
    }
    let golden = std::fs::read(&path).expect("golden payload fixture");
    assert_eq!(range_encode(&symbols, &d).unwrap().bytes, golden);
    let decoded = range_decode(&Bitpayload::from_bytes(golden), &d, n).unwrap();
    assert_eq!(decoded, symbols);
}

#[test]
fn distinct_references_give_distinct_priors() {
    let w = StvcWeights::new(48, 0).unwrap();
    let rate = RateParam::new(64.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut field = || LatentFeature::from_fn((48, 8, 8), |_, _, _| rng.random_range(-2.0..2.0));
    let (a, b) = (field(), field());
    let da = context_params(Some(&a), (8, 8), rate, &w).unwrap();
    let db = context_params(Some(&b), (8, 8), rate, &w).unwrap();
    assert_ne!(da.means(), db.means());
    assert_ne!(da.scales(), db.scales());
    let intra = context_params(None, (8, 8), rate, &w).unwrap();
    assert!(intra.means().iter().all(|&m| m == 0.0));
}

#[test]
fn reference_dims_are_checked() {
    let w = StvcWeights::new(48, 0).unwrap();
    let r = LatentFeature::zeros(48, 8, 4);
    assert!(context_params(Some(&r), (8, 8), RateParam::new(64.0).unwrap(), &w).is_err());
}

#[test]
fn payloads_are_deterministic() {
    let d = SymbolDistribution::new(ALPHABET_BOUND, vec![0.3; 100], vec![1.5; 100]);
    let s: Vec<i32> = (0..100).map(|i| (i % 7) - 3).collect();
    assert_eq!(range_encode(&s, &d).unwrap(), range_encode(&s, &d).unwrap());
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<i32>)> {
    (0usize..300).prop_flat_map(|n| {
        (
            prop::collection::vec(-130.0f64..130.0, n),
            prop::collection::vec(0.0f64..60.0, n),
            prop::collection::vec(-ALPHABET_BOUND..=ALPHABET_BOUND, n),
        )
    })
}

proptest! {
    #[test]
    fn round_trip_is_lossless((means, scales, symbols) in case()) {
        let d = SymbolDistribution::new(ALPHABET_BOUND, means, scales);
        let payload = range_encode(&symbols, &d).unwrap();
        prop_assert_eq!(range_decode(&payload, &d, symbols.len()).unwrap(), symbols);
    }

    #[test]
    fn rate_estimate_bounds_payload((means, scales, symbols) in case()) {
        let d = SymbolDistribution::new(ALPHABET_BOUND, means, scales);
        let est = estimate_rate(&symbols, &d).unwrap();
        let actual = 8.0 * range_encode(&symbols, &d).unwrap().bytes.len() as f64;
        prop_assert!(est.is_finite());
        prop_assert!(actual <= est * 1.01 + 64.0 && actual >= est - 64.0);
    }

    #[test]
    fn pmf_is_a_distribution(mean in -200.0f64..200.0, scale in 0.0f64..100.0) {
        let d = SymbolDistribution::new(ALPHABET_BOUND, vec![mean], vec![scale]);
        let p = d.pmf(0);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 1.0 / PROB_TOTAL as f64));
    }
}
