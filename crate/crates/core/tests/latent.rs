use i2vc::{Frame, LatentFeature, LatentTransform};
use proptest::prelude::*;

fn frame(h: usize, w: usize) -> impl Strategy<Value = Frame> {
    prop::collection::vec(0.0f64..=1.0, 3 * h * w).prop_map(move |d| Frame::new(h, w, d).unwrap())
}

proptest! {
    #[test]
    fn transform_is_linear(x in frame(8, 12), y in frame(8, 12), a in 0.0f64..=1.0, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        // Convex weights keep the mixture a valid frame.
        let b = (1.0 - a) * frac;
        let t = LatentTransform::new(48, seed).unwrap();
        let mix: Vec<f64> = x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect();
        let lhs = t.to_latent(&Frame::new(8, 12, mix).unwrap()).unwrap();
        let (lx, ly) = (t.to_latent(&x).unwrap(), t.to_latent(&y).unwrap());
        for ((l, u), v) in lhs.data().iter().zip(lx.data()).zip(ly.data()) {
            prop_assert!((l - (a * u + b * v)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_width_transform_is_invertible(x in frame(8, 8), seed in any::<u64>()) {
        let t = LatentTransform::new(48, seed).unwrap();
        let back = t.from_latent(&t.to_latent(&x).unwrap()).unwrap();
        for (u, v) in back.data().iter().zip(x.data()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_is_preserved(x in frame(4, 8), seed in any::<u64>()) {
        let t = LatentTransform::new(48, seed).unwrap();
        let y = t.to_latent(&x).unwrap();
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        prop_assert!((y.sum_squares() - e).abs() < 1e-10 * e.max(1.0));
    }

    #[test]
    fn reconstruction_stays_in_range(v in prop::collection::vec(-50.0f64..50.0, 48 * 4), c in 1usize..=48) {
        let t = LatentTransform::new(c, 1).unwrap();
        let l = LatentFeature::from_vec(c, 2, 2, v[..c * 4].to_vec()).unwrap();
        let f = t.from_latent(&l).unwrap();
        prop_assert!(f.data().iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn latent_dims_follow_patch_grid() {
    let t = LatentTransform::new(16, 0).unwrap();
    assert_eq!(t.latent_dims(32, 48), (16, 8, 12));
    assert!(Frame::filled(6, 8, 0.5).is_err());
}
