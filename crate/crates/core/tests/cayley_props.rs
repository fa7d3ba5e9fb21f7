use proptest::prelude::*;
use ssf_core::cayley::{
    cayley, chain_rule_check, defect_identities_check, dissipative_hypotheses, dissipative_remainder_check,
    hermitian_calculus_check, integration_by_parts_gap, inverse_cayley, pkq_polynomials, real_line_ssf, zeta_n,
    DissipativeOp, RealPolynomial, ZetaConvention,
};
use ssf_core::linalg::{c64, fro_norm, unitarity_residual, ContractionOp, C64};
use ssf_core::random::InstanceRng;
use ssf_core::ssf::SpectralShiftFn;

fn grid(half: f64, points_per_side: usize) -> Vec<f64> {
    let h = half / points_per_side as f64;
    (-(points_per_side as i64)..=points_per_side as i64).map(|j| j as f64 * h).collect()
}

/// Antiderivative from 0 of a polynomial.
fn integrate(p: &RealPolynomial) -> RealPolynomial {
    let mut c = vec![0.0];
    c.extend(p.coefficients().iter().enumerate().map(|(j, &a)| a / (j + 1) as f64));
    RealPolynomial::new(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn cayley_roundtrip(seed in any::<u64>(), d in 1usize..=5) {
        let t = ContractionOp::new(InstanceRng::new(seed).strict_contraction(d)).unwrap();
        let a = inverse_cayley(&t).unwrap();
        prop_assert!(fro_norm(&(cayley(&a).unwrap().matrix() - t.matrix())) <= 1e-10);
    }

    #[test]
    fn hermitian_inputs_give_unitaries(seed in any::<u64>(), d in 1usize..=5) {
        let a = DissipativeOp::new(InstanceRng::new(seed).hermitian_with_norm(d, 3.0)).unwrap();
        prop_assert!(unitarity_residual(cayley(&a).unwrap().matrix()) <= 1e-10);
    }

    #[test]
    fn defect_identities(seed in any::<u64>(), d in 1usize..=5) {
        let a = DissipativeOp::new(InstanceRng::new(seed).dissipative(d)).unwrap();
        let r = defect_identities_check(&a).unwrap();
        prop_assert!(r.defect <= 1e-9 && r.defect_star <= 1e-9);
    }

    #[test]
    fn remainders_agree_across_the_transform(seed in any::<u64>(), n in 2usize..=3, q in prop_oneof![-4i64..=-1, 1i64..=4]) {
        let mut rng = InstanceRng::new(seed);
        let a0 = DissipativeOp::new(rng.dissipative(3)).unwrap();
        let a1 = DissipativeOp::new(rng.dissipative(3)).unwrap();
        let rep = dissipative_remainder_check(&a0, &a1, n, q).unwrap();
        prop_assert!(rep.residual <= 1e-10);
        prop_assert!(rep.endpoint_roundtrip <= 1e-10);
    }
}

#[test]
fn pkq_degrees_are_exact() {
    let table = pkq_polynomials(8).unwrap();
    for q in 1..=8usize {
        for k in 0..q {
            assert_eq!(table.get(k, q).unwrap().degree(), Some(2 * (q - 1) - k), "k {k}, q {q}");
        }
    }
    assert!(table.get(8, 8).is_none());
}

#[test]
fn pkq_coefficients_are_dyadic() {
    let table = pkq_polynomials(8).unwrap();
    for q in 1..=8usize {
        for k in 0..q {
            for &c in table.get(k, q).unwrap().coefficients() {
                let scaled = c * 2f64.powi(q as i32);
                assert_eq!(scaled, scaled.round());
            }
        }
    }
}

#[test]
fn chain_rule_across_orders() {
    let table = pkq_polynomials(4).unwrap();
    let ts: Vec<f64> = (0..20).map(|j| -2.9 + j as f64 * 0.29).collect();
    for m in -5i64..=5 {
        for q in 1..=4 {
            let r = chain_rule_check(&table, m, q, &ts).unwrap();
            assert!(r <= 1e-7, "m {m}, q {q}: {r:e}");
        }
    }
}

#[test]
fn zeta_for_constant_eta_matches_closed_form() {
    let table = pkq_polynomials(2).unwrap();
    let lam = grid(2.0, 2000);
    let eta = vec![c64(1.0, 0.0); lam.len()];
    let z = zeta_n(&eta, &lam, &table, 2, ZetaConvention::Printed).unwrap();
    // zeta_2 = p_{0,2} - int_0^l p_{1,2}.
    let exact = table.get(0, 2).unwrap().add(&integrate(table.get(1, 2).unwrap()).scale(-1.0));
    let h = lam[1] - lam[0];
    for (l, v) in lam.iter().zip(&z) {
        assert!((v.re - exact.eval(*l)).abs() <= 10.0 * h * h && v.im == 0.0);
    }
    let zi = zeta_n(&eta, &lam, &table, 2, ZetaConvention::Integrated).unwrap();
    assert!(z.iter().zip(&zi).all(|(a, b)| (a - b).norm() <= 1e-15));

    // Order three: p_{0,3} - int p_{1,3} + int int p_{2,3}.
    let table = pkq_polynomials(3).unwrap();
    let z = zeta_n(&eta, &lam, &table, 3, ZetaConvention::Printed).unwrap();
    let exact = table
        .get(0, 3)
        .unwrap()
        .add(&integrate(table.get(1, 3).unwrap()).scale(-1.0))
        .add(&integrate(&integrate(table.get(2, 3).unwrap())));
    for (l, v) in lam.iter().zip(&z) {
        assert!((v.re - exact.eval(*l)).abs() <= 100.0 * h * h);
    }
}

#[test]
fn integration_by_parts_selects_the_integrated_base_term() {
    let table = pkq_polynomials(3).unwrap();
    let lam = grid(3.0, 5000);
    let eta: Vec<C64> = lam.iter().map(|&l| c64((1.3 * l).sin() + 0.5, 0.2 * l.cos())).collect();
    for n in [2, 3] {
        let integrated = integration_by_parts_gap(&eta, &lam, &table, n, ZetaConvention::Integrated).unwrap();
        let printed = integration_by_parts_gap(&eta, &lam, &table, n, ZetaConvention::Printed).unwrap();
        assert!(integrated <= 1e-3, "n {n}: {integrated:e}");
        assert!(printed > 1e-2, "n {n}: {printed:e}");
    }
}

#[test]
fn real_line_samples() {
    let zero = SpectralShiftFn::new(2, 3, []).unwrap();
    let lam = grid(10.0, 100);
    let s = real_line_ssf(&zero, &lam);
    assert_eq!(s.len(), lam.len());
    assert!(s.iter().all(|z| z.norm() == 0.0));
    let one = SpectralShiftFn::new(2, 1, [(1, c64(1.0, 0.0))]).unwrap();
    let s = real_line_ssf(&one, &[0.0, 1.0]);
    assert!((s[0] - c64(1.0, 0.0)).norm() < 1e-15);
    // lambda = 1 sits at t = -pi/2.
    assert!((s[1] - c64(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn hermitian_calculus_and_hypotheses() {
    let mut rng = InstanceRng::new(2);
    for _ in 0..10 {
        let a = rng.hermitian_with_norm(4, 5.0);
        let phi = rng.trig_poly(6);
        assert!(hermitian_calculus_check(&a, &phi).unwrap() <= 1e-9);
    }
    let a0 = DissipativeOp::new(rng.dissipative(3)).unwrap();
    let a1 = DissipativeOp::new(rng.dissipative(3)).unwrap();
    let h = dissipative_hypotheses(&a0, &a1, 3).unwrap();
    assert_eq!(h.im_index, 2);
    assert!(h.im_norms.iter().all(|x| x.is_finite() && *x > 0.0));
    let same = dissipative_hypotheses(&a0, &a0, 2).unwrap();
    assert_eq!(same.difference_norm, 0.0);
    assert_eq!(same.resolvent_difference_norm, 0.0);
}
