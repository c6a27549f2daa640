use jflow::geometry::{read_snapshot, write_snapshot, ScalarField, TorusGrid};
use jflow::oracle::sigma_bruteforce;
use jflow::symfunc::{cone_margin, in_gamma_k, quotient_rhs, sigma, sigma_minor, FlowIndices};
use proptest::prelude::*;

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=6).prop_flat_map(|n| prop::collection::vec(-3.0f64..3.0, n))
}

fn positive_spectrum() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=5).prop_flat_map(|n| prop::collection::vec(0.01f64..5.0, n))
}

proptest! {
    #[test]
    fn cones_are_nested(lam in spectrum()) {
        for k in 2..=lam.len() {
            if in_gamma_k(&lam, k) {
                prop_assert!(in_gamma_k(&lam, k - 1));
            }
        }
    }

    #[test]
    fn minor_identity(lam in spectrum(), i in 0usize..6, m in 1usize..=6) {
        let n = lam.len();
        let (i, m) = (i % n, (m - 1) % (n - 1) + 1);
        let whole = sigma(m, &lam).unwrap();
        let split = sigma_minor(m, &lam, i).unwrap() + lam[i] * sigma_minor(m - 1, &lam, i).unwrap();
        let scale = sigma_bruteforce(m, &lam.iter().map(|x| x.abs()).collect::<Vec<_>>()).max(1.0);
        prop_assert!((whole - split).abs() <= 1e-12 * scale);
    }

    #[test]
    fn sigma_is_symmetric(mut lam in spectrum(), m in 0usize..=6) {
        let m = m % (lam.len() + 1);
        let before = sigma(m, &lam).unwrap();
        lam.reverse();
        let after = sigma(m, &lam).unwrap();
        prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn quotient_is_homogeneous(lam in positive_spectrum(), t in 0.1f64..10.0) {
        let n = lam.len();
        for k in 2..=n {
            for l in 1..k {
                let idx = FlowIndices::single(n, k, l).unwrap();
                let q = quotient_rhs(&lam, &idx).unwrap();
                let scaled: Vec<f64> = lam.iter().map(|x| t * x).collect();
                let qt = quotient_rhs(&scaled, &idx).unwrap();
                let expect = q * t.powi(l as i32 - k as i32);
                prop_assert!((qt - expect).abs() <= 1e-12 * expect.abs());
            }
        }
    }

    #[test]
    fn margin_increases_with_c(lam in positive_spectrum(), c in 0.01f64..5.0, dc in 0.001f64..1.0) {
        let n = lam.len();
        let a = cone_margin(&lam, c, n, n - 1).unwrap();
        let b = cone_margin(&lam, c + dc, n, n - 1).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn snapshot_round_trip(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 64), t in prop::num::f64::ANY) {
        prop_assume!(t.is_finite());
        let grid = TorusGrid::new(2, 8).unwrap();
        let field = ScalarField::new(grid, values).unwrap();
        let snap = read_snapshot(&write_snapshot(&field, "u", t)).unwrap();
        prop_assert_eq!(snap.t.to_bits(), t.to_bits());
        for (a, b) in snap.field.values().iter().zip(field.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
