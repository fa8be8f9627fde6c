use chemo_core::diagnostics::{envelope_check, lp_norm, mass, NormOrder};
use proptest::prelude::*;

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, 1..50)
}

proptest! {
    #[test]
    fn mass_and_norms_are_homogeneous(f in field(), c in 0.0..5.0f64, p in 1.0..6.0f64) {
        let h = 1.0 / f.len() as f64;
        let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
        let tol = |x: f64| 1e-12 * x.abs().max(1e-12);
        let m = mass(&f, h);
        prop_assert!((mass(&scaled, h) - c * m).abs() <= tol(c * m));
        for order in [NormOrder::Finite(p), NormOrder::Infinity] {
            let n = lp_norm(&f, h, order).unwrap();
            prop_assert!((lp_norm(&scaled, h, order).unwrap() - c * n).abs() <= 1e-10 * (c * n).max(1e-12));
        }
    }

    #[test]
    fn norms_grow_with_the_exponent_on_a_unit_domain(f in field(), p in 1.0..5.0f64, q in 0.0..3.0f64) {
        let h = 1.0 / f.len() as f64;
        let low = lp_norm(&f, h, NormOrder::Finite(p)).unwrap();
        let high = lp_norm(&f, h, NormOrder::Finite(p + q)).unwrap();
        let sup = lp_norm(&f, h, NormOrder::Infinity).unwrap();
        prop_assert!(low <= high * (1.0 + 1e-12) + 1e-300);
        prop_assert!(high <= sup * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn envelope_ignores_positive_scaling(values in prop::collection::vec(0.0..10.0f64, 2..30), c in 0.01..100.0f64) {
        let series: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| (k as f64 * 0.5, v)).collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, c * v)).collect();
        let a = envelope_check(&series, 1.0, 1).unwrap();
        let b = envelope_check(&scaled, 1.0, 1).unwrap();
        // scaling can only flip ties broken by rounding
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            let j = k + 1;
            let (now, before) = (values[2 * j], values[2 * j - 2]);
            if (now - before).abs() > 1e-12 * now.max(before) {
                prop_assert_eq!(x, y);
            }
        }
    }
}
