use proptest::prelude::*;
use ssf_core::linalg::{c64, complex_diag, fro_norm, principal_log_unitary, ContractionOp, C64};
use ssf_core::random::InstanceRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn split_reassembles(seed in any::<u64>(), degree in 0usize..12) {
        let mut rng = InstanceRng::new(seed);
        let phi = rng.trig_poly(degree);
        let (plus, minus) = phi.split_pm();
        for _ in 0..50 {
            let t = rng.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            let gap = (phi.eval_at(t) - plus.eval_at(t) - minus.eval_at(-t)).norm();
            prop_assert!(gap <= 1e-12);
        }
    }

    #[test]
    fn unitary_calculus_is_spectral(seed in any::<u64>(), d in 1usize..=6, degree in 0usize..10) {
        let mut rng = InstanceRng::new(seed);
        let u = rng.unitary(d);
        let phi = rng.trig_poly(degree);
        let log = principal_log_unitary(&u).unwrap();
        let values: Vec<C64> = log.spectrum().iter().map(|&t| phi.eval_at(t)).collect();
        let q = log.eigenvectors();
        let spectral = q * complex_diag(&values) * q.adjoint();
        let op = ContractionOp::new(u).unwrap();
        prop_assert!(fro_norm(&(phi.eval_on_contraction(&op) - spectral)) <= 1e-9);
    }

    #[test]
    fn calculus_is_linear(seed in any::<u64>(), d in 1usize..=6, da in 0usize..8, db in 0usize..8) {
        let mut rng = InstanceRng::new(seed);
        let op = ContractionOp::new(rng.strict_contraction(d)).unwrap();
        let (a, b) = (rng.trig_poly(da), rng.trig_poly(db));
        let (x, y) = (rng.complex_gaussian(), rng.complex_gaussian());
        let lhs = a.scale(x).add(&b.scale(y)).eval_on_contraction(&op);
        let rhs = a.eval_on_contraction(&op) * x + b.eval_on_contraction(&op) * y;
        prop_assert!(fro_norm(&(lhs - rhs)) <= 1e-12);
    }

    #[test]
    fn json_roundtrip(seed in any::<u64>(), degree in 0usize..12) {
        let phi = InstanceRng::new(seed).trig_poly(degree);
        let text = serde_json::to_string(&phi).unwrap();
        prop_assert_eq!(ssf_core::funcspace::trig_poly_from_json(&text).unwrap(), phi);
    }
}

#[test]
fn circle_derivative_matches_difference() {
    let phi = ssf_core::TrigPoly::from_coeffs([(3, c64(0.5, -1.0)), (-2, c64(0.25, 0.0)), (1, c64(0.0, 2.0))]);
    let d1 = phi.circle_derivative(1);
    let h = 1e-5;
    for t in [0.1, 1.3, -2.2] {
        let fd = (phi.eval_at(t + h) - phi.eval_at(t - h)) / (2.0 * h);
        assert!((fd - d1.eval_at(t)).norm() < 1e-8);
    }
}
