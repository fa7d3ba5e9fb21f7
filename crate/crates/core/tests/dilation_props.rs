use proptest::prelude::*;
use ssf_core::dilation::{
    corner_check, dilate, dilate_pair, extend_contraction, extend_unitary, required_modes, verify_trace_transfer_orders,
    HardyFrame,
};
use ssf_core::linalg::{abs_value, block, c64, fro_norm, identity, matrix_power, max_abs, zeros, CMatrix, ContractionOp};
use ssf_core::pairs::{build_cc_pair, build_cu_pair};
use ssf_core::random::InstanceRng;
use ssf_core::TrigPoly;

fn compress(frame: &HardyFrame, m: &CMatrix) -> CMatrix {
    block(m, frame.h_offset(), frame.h_offset(), frame.dim(), frame.dim())
}

fn random_contraction(rng: &mut InstanceRng, d: usize, flavor: u64) -> ContractionOp {
    let t = match flavor % 3 {
        0 => rng.strict_contraction(d),
        1 => rng.contraction_with_unit_singular(d, 1),
        _ => {
            let mut t = rng.strict_contraction(d);
            t.column_mut(d - 1).fill(c64(0.0, 0.0));
            t
        }
    };
    ContractionOp::new(t).unwrap()
}

/// Coordinates of every Hardy mode below `top`, both sides, plus `H`.
fn low_coords(frame: &HardyFrame, top: usize) -> Vec<usize> {
    let mut c = frame.h_coords();
    for m in 0..top {
        c.extend(frame.minus_coords(m));
        c.extend(frame.plus_coords(m));
    }
    c
}

fn restrict(m: &CMatrix, coords: &[usize]) -> CMatrix {
    CMatrix::from_fn(coords.len(), coords.len(), |i, j| m[(coords[i], coords[j])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn powers_compress_exactly(seed in any::<u64>(), d in 1usize..=5, modes in 1usize..=10) {
        let mut rng = InstanceRng::new(seed);
        let t = random_contraction(&mut rng, d, seed);
        let (frame, u) = dilate(&t, modes).unwrap();
        let mut p = identity(frame.total_dim());
        let mut tp = identity(d);
        for _ in 0..=2 * modes {
            prop_assert!(fro_norm(&(compress(&frame, &p) - &tp)) <= 1e-12);
            p = &p * &u;
            tp = &tp * t.matrix();
        }
        let ua = u.adjoint();
        let mut p = identity(frame.total_dim());
        let ta = t.adjoint();
        for n in 0..modes {
            prop_assert!(fro_norm(&(compress(&frame, &p) - matrix_power(&ta, n))) <= 1e-12);
            p = &p * &ua;
        }
    }

    #[test]
    fn shift_and_projection_structure(seed in any::<u64>(), d in 1usize..=4, modes in 1usize..=6) {
        let t = random_contraction(&mut InstanceRng::new(seed), d, 0);
        let frame = HardyFrame::new(&t, modes).unwrap();
        let r = frame.fiber_rank();
        let s = frame.forward_shift();
        let mut top = identity(modes * r);
        let mut bottom = identity(modes * r);
        for j in 0..r {
            top[((modes - 1) * r + j, (modes - 1) * r + j)] = c64(0.0, 0.0);
            bottom[(j, j)] = c64(0.0, 0.0);
        }
        prop_assert!(fro_norm(&(s.adjoint() * &s - top)) == 0.0);
        prop_assert!(fro_norm(&(&s * s.adjoint() - bottom)) == 0.0);
        let p = frame.projection_h();
        prop_assert!(fro_norm(&(&p * &p - &p)) == 0.0 && fro_norm(&(p.adjoint() - &p)) == 0.0);
        let rank = (0..p.nrows()).filter(|&i| p[(i, i)].re == 1.0).count();
        prop_assert_eq!(rank, d);
    }

    #[test]
    fn extension_of_v_matches_interpolation_unitary(seed in any::<u64>(), d in 1usize..=5, modes in 2usize..=6) {
        let mut rng = InstanceRng::new(seed);
        let t = random_contraction(&mut rng, d, seed);
        let v = rng.unitary(d);
        let (frame, u1) = dilate(&t, modes).unwrap();
        let u0 = extend_unitary(&v, &frame).unwrap();
        let pair = build_cu_pair(&t, &v).unwrap();
        let mut coords = frame.h_coords();
        coords.extend(frame.plus_coords(0));
        let l = restrict(&(&u1 * u0.adjoint()), &coords);
        prop_assert!(fro_norm(&(l - pair.interp_unitary())) <= 1e-10);
        // Defect of the truncated U0 lives on the top plus mode only.
        let defect = u0.adjoint() * &u0 - identity(frame.total_dim());
        let low = low_coords(&frame, modes - 1);
        let mut masked = zeros(frame.total_dim(), low.len());
        for (j, &c) in low.iter().enumerate() {
            masked.set_column(j, &defect.column(c));
        }
        prop_assert!(max_abs(&masked) <= 1e-12);
    }

    #[test]
    fn extended_contraction_blocks(seed in any::<u64>(), d in 1usize..=5, modes in 2usize..=6) {
        let mut rng = InstanceRng::new(seed);
        let t0 = random_contraction(&mut rng, d, seed);
        let t1 = random_contraction(&mut rng, d, seed + 1);
        let frame = HardyFrame::new(&t0, modes).unwrap();
        let big = extend_contraction(&t1, &frame).unwrap();
        prop_assert!(fro_norm(&(compress(&frame, &big) - t1.matrix())) == 0.0);
        let op = ContractionOp::new(big.clone()).unwrap();
        let low = low_coords(&frame, modes - 1);
        let mut expect_defect = zeros(frame.total_dim(), frame.total_dim());
        let mut expect_abs = identity(frame.total_dim());
        let h = frame.h_offset();
        ssf_core::linalg::set_block(&mut expect_defect, h, h, t1.defect());
        ssf_core::linalg::set_block(&mut expect_abs, h, h, &abs_value(t1.matrix()));
        prop_assert!(fro_norm(&(restrict(op.defect(), &low) - restrict(&expect_defect, &low))) <= 1e-10);
        prop_assert!(fro_norm(&(restrict(op.modulus(), &low) - restrict(&expect_abs, &low))) <= 1e-9);
    }
}

#[test]
fn trace_transfer_and_corners_on_both_kinds() {
    for i in 0..8u64 {
        let mut rng = InstanceRng::instance(21, i);
        let d = rng.int_in(2, 3);
        let t = random_contraction(&mut rng, d, i);
        let pair = if i % 2 == 0 {
            build_cu_pair(&t, &rng.unitary(d)).unwrap()
        } else {
            build_cc_pair(&random_contraction(&mut rng, d, i + 1), &t).unwrap()
        };
        for q in [-3i64, 1, 4] {
            let phi = TrigPoly::monomial(q, c64(1.0, 0.0));
            let dil = dilate_pair(&pair, required_modes(&phi, 3)).unwrap();
            for tt in verify_trace_transfer_orders(&pair, &dil, &phi, 3).unwrap() {
                assert!(tt.gap <= 1e-8, "instance {i}, q {q}, n {}: gap {:e}", tt.order, tt.gap);
            }
            for n in [2, 3] {
                let c = corner_check(&dil, &phi, n).unwrap();
                assert!(c.corner_trace.norm() <= 1e-10, "instance {i}, q {q}");
                assert!(c.diag_block_max <= 1e-10, "instance {i}, q {q}");
                assert!(c.outside_support_max <= 1e-12, "instance {i}, q {q}");
            }
        }
    }
}
