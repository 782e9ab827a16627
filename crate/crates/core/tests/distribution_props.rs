use proptest::prelude::*;

use radar_forge::distribution::{kl_divergence, rasterize_mixture, Covariance2, ProbabilityGrid};
use radar_forge::geometry::PixelCoord;

fn covariance() -> impl Strategy<Value = Covariance2> {
    (0.5..8.0f64, 0.5..8.0f64, -0.9..0.9f64).prop_map(|(su, sv, rho)| Covariance2::new(su * su, rho * su * sv, sv * sv).unwrap())
}

fn points(w: usize, h: usize) -> impl Strategy<Value = Vec<PixelCoord>> {
    prop::collection::vec((0.0..w as f64 - 1.0, 0.0..h as f64 - 1.0).prop_map(|(u, v)| PixelCoord::new(u, v)), 1..30)
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, 1e-9..1e-6f64], 12).prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.0)
}

proptest! {
    #[test]
    fn grids_are_normalized(pts in points(40, 30), sigma in covariance()) {
        let g = rasterize_mixture(&pts, &sigma, 40, 30).unwrap();
        prop_assert!((g.total() - 1.0).abs() <= 1e-9);
        prop_assert!(g.mass().iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn point_order_does_not_matter(mut pts in points(40, 30), sigma in covariance(), rot in 0usize..30) {
        let a = rasterize_mixture(&pts, &sigma, 40, 30).unwrap();
        pts.reverse();
        let k = rot % pts.len();
        pts.rotate_left(k);
        let b = rasterize_mixture(&pts, &sigma, 40, 30).unwrap();
        for (x, y) in a.mass().iter().zip(b.mass()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalization_is_scale_free(w in weights(), c in 1e-6..1e6f64, e in -20i32..20) {
        let base = ProbabilityGrid::from_weights(4, 3, w.clone()).unwrap();
        let scaled = ProbabilityGrid::from_weights(4, 3, w.iter().map(|x| x * c).collect()).unwrap();
        for (x, y) in base.mass().iter().zip(scaled.mass()) {
            prop_assert!((x - y).abs() <= 1e-15 + 1e-14 * x);
        }
        // powers of two scale without rounding
        let pow2 = ProbabilityGrid::from_weights(4, 3, w.iter().map(|x| x * 2f64.powi(e)).collect()).unwrap();
        prop_assert_eq!(base, pow2);
    }

    #[test]
    fn kl_is_nonnegative(p in weights(), q in weights()) {
        let p = ProbabilityGrid::from_weights(4, 3, p).unwrap();
        let q = ProbabilityGrid::from_weights(4, 3, q).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-9);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }
}
