use proptest::prelude::*;
use ssf_core::linalg::{
    abs_value, c64, complex_diag, defect, fro_norm, identity, polar_unitary, principal_log_unitary, real_diag, schatten_norm,
    svd, trace, unitarity_residual, CMatrix, ContractionOp,
};
use ssf_core::random::InstanceRng;

fn unitary_with_phases(rng: &mut InstanceRng, phases: &[f64]) -> CMatrix {
    let q = rng.unitary(phases.len());
    let diag: Vec<_> = phases.iter().map(|&t| c64(t.cos(), t.sin())).collect();
    &q * complex_diag(&diag) * q.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_factorizes_degenerate_inputs(seed in any::<u64>(), d in 1usize..=7, units in 0usize..4, cut in 0usize..3) {
        let mut rng = InstanceRng::new(seed);
        let mut t = rng.contraction_with_unit_singular(d, units.min(d));
        if cut > 0 {
            t.column_mut(0).fill(c64(0.0, 0.0));
        }
        let t = if cut == 2 { t.adjoint().columns(0, d.max(2) - 1).clone_owned() } else { t };
        let s = svd(&t);
        let k = s.sigma.len();
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(fro_norm(&(&s.u * real_diag(&s.sigma) * s.w.adjoint() - &t)) <= 1e-13);
        prop_assert!(fro_norm(&(s.u.adjoint() * &s.u - identity(k))) <= 1e-13);
        prop_assert!(fro_norm(&(s.w.adjoint() * &s.w - identity(k))) <= 1e-13);
    }

    #[test]
    fn log_exp_roundtrip(seed in any::<u64>(), d in 1usize..=8) {
        let u = InstanceRng::new(seed).unitary(d);
        let g = principal_log_unitary(&u).unwrap();
        prop_assert!(fro_norm(&(g.exp_i(1.0) - &u)) <= 1e-9);
        prop_assert!(g.spectrum().iter().all(|&t| t > -std::f64::consts::PI && t <= std::f64::consts::PI));
    }

    #[test]
    fn log_exp_near_branch_cut(seed in any::<u64>(), d in 2usize..=8, near in 0usize..3) {
        let mut rng = InstanceRng::new(seed);
        let mut phases: Vec<f64> = (0..d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        for p in phases.iter_mut().take(near + 1) {
            *p = std::f64::consts::PI - rng.uniform() * 1e-6;
        }
        let u = unitary_with_phases(&mut rng, &phases);
        let g = principal_log_unitary(&u).unwrap();
        prop_assert!(fro_norm(&(g.exp_i(1.0) - &u)) <= 1e-9);
    }

    #[test]
    fn defect_commutes_with_gram(seed in any::<u64>(), d in 1usize..=6, units in 0usize..3) {
        let mut rng = InstanceRng::new(seed);
        let t = rng.contraction_with_unit_singular(d, units.min(d));
        let op = defect(&t, 1e-10).unwrap();
        let gram = t.adjoint() * &t;
        prop_assert!(fro_norm(&(op.defect() * &gram - &gram * op.defect())) <= 1e-10);
        prop_assert!(fro_norm(&(op.defect() * op.defect() - (identity(d) - &gram))) <= 1e-10);
        prop_assert!(fro_norm(&(&t * op.defect() - op.defect_star() * &t)) <= 1e-10);
    }

    #[test]
    fn schatten_one_bounds_trace(seed in any::<u64>(), d in 1usize..=6) {
        let x = InstanceRng::new(seed).gaussian_matrix(d, d);
        prop_assert!(schatten_norm(&x, 1).unwrap() + 1e-12 >= trace(&x).unwrap().norm());
    }

    #[test]
    fn schatten_monotone_in_index(seed in any::<u64>(), d in 1usize..=6, n in 1u32..6) {
        let x = InstanceRng::new(seed).gaussian_matrix(d, d);
        prop_assert!(schatten_norm(&x, n + 1).unwrap() <= schatten_norm(&x, n).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn polar_factorization_hundred_cases() {
    for i in 0..100u64 {
        let mut rng = InstanceRng::instance(7, i);
        let d = rng.int_in(1, 6);
        let t = match i % 3 {
            0 => rng.strict_contraction(d),
            1 => rng.contraction_with_unit_singular(d, 1),
            // Rank-deficient: one kernel direction.
            _ => {
                let mut t = rng.strict_contraction(d);
                t.column_mut(0).fill(c64(0.0, 0.0));
                t
            }
        };
        let v = polar_unitary(&t).unwrap();
        assert!(unitarity_residual(&v) <= 1e-10, "case {i}");
        assert!(fro_norm(&(&t - &v * abs_value(&t))) <= 1e-10, "case {i}");
        let op = ContractionOp::new(t.clone()).unwrap();
        assert!(fro_norm(&(op.polar() - &v)) <= 1e-12, "case {i}");
    }
}
