//! Interpolating unitaries for (contraction, unitary) and (contraction,
//! contraction) pairs, and the multiplicative paths they generate.
//!
//! Defect spaces enter through the orthonormal bases cached on
//! `ContractionOp`, so the assembled matrices act on `H + D_T` (or
//! `H + D_{T0} + D_{T1}`) and are unitary even when the defects are rank
//! deficient.

use crate::error::{invalid, Result, SsfError};
use crate::linalg::{
    fro_norm, leading_isometry, principal_log_unitary, schatten_norm, set_block, unitarity_residual,
    zeros, CMatrix, ContractionOp, HermitianGenerator, DEFAULT_RANK_TOL,
};
use crate::paths::MultiplicativePath;

const UNITARY_TOL: f64 = 1e-10;
const ENDPOINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Start is a unitary `V`, end a contraction `T`.
    ContractionUnitary,
    /// Start `T0`, end `T1`, both contractions.
    ContractionContraction,
}

#[derive(Debug, Clone)]
pub struct PairFrame {
    kind: PairKind,
    start: ContractionOp,
    end: ContractionOp,
    interp_unitary: CMatrix,
    generator: HermitianGenerator,
    path: MultiplicativePath,
}

impl PairFrame {
    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn start(&self) -> &ContractionOp {
        &self.start
    }

    pub fn end(&self) -> &ContractionOp {
        &self.end
    }

    /// The assembled unitary on the extended space.
    pub fn interp_unitary(&self) -> &CMatrix {
        &self.interp_unitary
    }

    pub fn generator(&self) -> &HermitianGenerator {
        &self.generator
    }

    pub fn path(&self) -> &MultiplicativePath {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    pub fn extended_dim(&self) -> usize {
        self.interp_unitary.nrows()
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.interp_unitary)
    }

    /// `||e^{i generator} - interp_unitary||_F`.
    pub fn log_residual(&self) -> f64 {
        fro_norm(&(self.generator.exp_i(1.0) - &self.interp_unitary))
    }

    /// Distances of `path(0)` from the start and `path(1)` from the end.
    pub fn endpoint_gaps(&self) -> (f64, f64) {
        (
            fro_norm(&(self.path.value(0.0) - self.start.matrix())),
            fro_norm(&(self.path.value(1.0) - self.end.matrix())),
        )
    }
}

fn finish(
    kind: PairKind,
    start: ContractionOp,
    end: ContractionOp,
    interp_unitary: CMatrix,
    base: CMatrix,
) -> Result<PairFrame> {
    let d = start.dim();
    let generator = principal_log_unitary(&interp_unitary)?;
    let embed = leading_isometry(interp_unitary.nrows(), d);
    let path = MultiplicativePath::with_start(generator.clone(), base, embed, start.matrix())?;
    let gap = fro_norm(&(path.value(1.0) - end.matrix()));
    if gap > ENDPOINT_TOL {
        return Err(SsfError::Connection { gap });
    }
    Ok(PairFrame {
        kind,
        start,
        end,
        interp_unitary,
        generator,
        path,
    })
}

/// `L = [[T V^*, -D_{T*} V_T Q], [Q^* D_T V^*, Q^* T^* V_T Q]]` on `H + D_T`,
/// with the path `P_H e^{isL} [V; 0]` running from `V` to `T`.
pub fn build_cu_pair(t: &ContractionOp, v: &CMatrix) -> Result<PairFrame> {
    let d = t.dim();
    if v.shape() != (d, d) {
        return invalid(format!("unitary must be {d}x{d}, got {}x{}", v.nrows(), v.ncols()));
    }
    let residual = unitarity_residual(v);
    if residual > UNITARY_TOL {
        return Err(SsfError::NotUnitary { residual });
    }
    let start = ContractionOp::with_tolerances(v.clone(), DEFAULT_RANK_TOL, UNITARY_TOL)?;
    let l = assemble_cu(t, v, t.defect_basis());
    let mut base = zeros(l.nrows(), d);
    set_block(&mut base, 0, 0, v);
    finish(PairKind::ContractionUnitary, start, t.clone(), l, base)
}

fn assemble_cu(t: &ContractionOp, v: &CMatrix, q: &CMatrix) -> CMatrix {
    let d = t.dim();
    let r = q.ncols();
    let tm = t.matrix();
    let vt = t.polar();
    let v_adj = v.adjoint();
    let q_adj = q.adjoint();
    let mut l = zeros(d + r, d + r);
    set_block(&mut l, 0, 0, &(tm * &v_adj));
    if r > 0 {
        set_block(&mut l, 0, d, &-(t.defect_star() * vt * q));
        set_block(&mut l, d, 0, &(&q_adj * t.defect() * &v_adj));
        set_block(&mut l, d, d, &(&q_adj * tm.adjoint() * vt * q));
    }
    l
}

/// The nontrivial block `K` on `H + D_{T0} + D_{T1}`; the path
/// `P_H e^{isK} [T0; Q0^* D_{T0}; 0]` runs from `T0` to `T1`.
pub fn build_cc_pair(t0: &ContractionOp, t1: &ContractionOp) -> Result<PairFrame> {
    if t0.dim() != t1.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", t0.dim(), t1.dim()));
    }
    let (k, base) = assemble_cc(t0, t1, t0.defect_basis(), t1.defect_basis());
    finish(PairKind::ContractionContraction, t0.clone(), t1.clone(), k, base)
}

fn assemble_cc(t0: &ContractionOp, t1: &ContractionOp, q0: &CMatrix, q1: &CMatrix) -> (CMatrix, CMatrix) {
    let d = t0.dim();
    let (r0, r1) = (q0.ncols(), q1.ncols());
    let n = d + r0 + r1;
    let a0 = t0.matrix();
    let a1 = t1.matrix();
    let a0_adj = a0.adjoint();
    let q0_adj = q0.adjoint();
    let q1_adj = q1.adjoint();
    let mut k = zeros(n, n);
    set_block(&mut k, 0, 0, &(a1 * &a0_adj));
    if r0 > 0 {
        set_block(&mut k, 0, d, &(a1 * t0.defect() * q0));
        set_block(&mut k, d, 0, &-(&q0_adj * t0.polar().adjoint() * t0.defect_star()));
        set_block(&mut k, d, d, &(&q0_adj * t0.modulus() * q0));
    }
    if r1 > 0 {
        set_block(&mut k, 0, d + r0, &-(t1.defect_star() * t1.polar() * q1));
        set_block(&mut k, d + r0, 0, &(&q1_adj * t1.defect() * &a0_adj));
        set_block(&mut k, d + r0, d + r0, &(&q1_adj * a1.adjoint() * t1.polar() * q1));
    }
    if r0 > 0 && r1 > 0 {
        set_block(&mut k, d + r0, d, &(&q1_adj * t1.defect() * t0.defect() * q0));
    }
    let mut base = zeros(n, d);
    set_block(&mut base, 0, 0, a0);
    if r0 > 0 {
        set_block(&mut base, d, 0, &(&q0_adj * t0.defect()));
    }
    (k, base)
}

/// Choose the construction from the inputs: a unitary start gives the
/// (contraction, unitary) pair, anything else the (contraction, contraction)
/// pair. The path always runs from `start` to `end`.
pub fn build_pair(start: &CMatrix, end: &CMatrix) -> Result<PairFrame> {
    let t1 = ContractionOp::new(end.clone())?;
    if start.shape() == end.shape() && start.nrows() == start.ncols() && unitarity_residual(start) <= UNITARY_TOL {
        build_cu_pair(&t1, start)
    } else {
        build_cc_pair(&ContractionOp::new(start.clone())?, &t1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// `(dim ker T_j, dim ker T_j^*)` for `j = 0, 1`.
    pub kernel_dims: [(usize, usize); 2],
    pub kernels_balanced: [bool; 2],
    /// `||T1 - T0||_n`.
    pub difference_norm: f64,
    /// `||D_{T_j}||_n`.
    pub defect_norms: [f64; 2],
}

pub fn check_hypotheses(t0: &ContractionOp, t1: &ContractionOp, n: u32) -> Result<HypothesisReport> {
    if t0.dim() != t1.dim() {
        return invalid("dimension mismatch");
    }
    let dims = |t: &ContractionOp| {
        let ker = t.kernel_dim();
        // Square: the singular values of T and T^* coincide.
        let ker_star = crate::linalg::svd(&t.adjoint())
            .sigma
            .iter()
            .filter(|&&s| s <= crate::linalg::KERNEL_TOL)
            .count();
        (ker, ker_star)
    };
    let kd = [dims(t0), dims(t1)];
    Ok(HypothesisReport {
        kernel_dims: kd,
        kernels_balanced: [kd[0].0 == kd[0].1, kd[1].0 == kd[1].1],
        difference_norm: schatten_norm(&(t1.matrix() - t0.matrix()), n)?,
        defect_norms: [schatten_norm(t0.defect(), n)?, schatten_norm(t1.defect(), n)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, identity};
    use crate::random::InstanceRng;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(x, 0.0))
    }

    #[test]
    fn cu_scalar_example() {
        let t = ContractionOp::new(scalar(0.0)).unwrap();
        let pair = build_cu_pair(&t, &scalar(1.0)).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert!(fro_norm(&(pair.interp_unitary() - expect)) < 1e-15);
        assert!(pair.log_residual() < 1e-14);
    }

    #[test]
    fn cu_unitary_is_trivial() {
        let mut rng = InstanceRng::new(2);
        let v = rng.unitary(3);
        let t = ContractionOp::new(v.clone()).unwrap();
        let pair = build_cu_pair(&t, &v).unwrap();
        assert_eq!(pair.extended_dim(), 3);
        assert!(fro_norm(&(pair.interp_unitary() - identity(3))) < 1e-13);
        assert!(fro_norm(pair.generator().matrix()) < 1e-12);
    }

    #[test]
    fn cu_rejects_non_unitary() {
        let t = ContractionOp::new(scalar(0.2)).unwrap();
        assert!(matches!(build_cu_pair(&t, &scalar(0.9)), Err(SsfError::NotUnitary { .. })));
    }

    #[test]
    fn cc_scalar_example() {
        let z = ContractionOp::new(scalar(0.0)).unwrap();
        let pair = build_cc_pair(&z, &z).unwrap();
        let k = pair.interp_unitary();
        let expect = CMatrix::from_row_slice(
            3,
            3,
            &[
                c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0),
                c64(-1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0),
                c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0),
            ],
        );
        assert!(fro_norm(&(k - expect)) < 1e-15);
        assert!(pair.unitarity_residual() < 1e-15);
    }

    #[test]
    fn cc_unitary_endpoints_are_trivial() {
        let mut rng = InstanceRng::new(3);
        let v = ContractionOp::new(rng.unitary(4)).unwrap();
        let pair = build_cc_pair(&v, &v).unwrap();
        assert!(fro_norm(&(pair.interp_unitary() - identity(4))) < 1e-13);
    }

    #[test]
    fn cc_gauge_invariance() {
        let mut rng = InstanceRng::new(8);
        let t0 = ContractionOp::new(rng.strict_contraction(3)).unwrap();
        let t1 = ContractionOp::new(rng.contraction_with_unit_singular(3, 1)).unwrap();
        let pair = build_cc_pair(&t0, &t1).unwrap();
        let w0 = rng.unitary(t0.defect_rank());
        let w1 = rng.unitary(t1.defect_rank());
        let (k, base) = assemble_cc(&t0, &t1, &(t0.defect_basis() * &w0), &(t1.defect_basis() * &w1));
        assert!(unitarity_residual(&k) < 1e-10);
        let gen = principal_log_unitary(&k).unwrap();
        let embed = leading_isometry(k.nrows(), 3);
        let rotated = MultiplicativePath::new(gen, base, embed).unwrap();
        for s in [0.1, 0.37, 0.8, 1.0] {
            assert!(fro_norm(&(rotated.value(s) - pair.path().value(s))) < 1e-10);
        }
    }

    #[test]
    fn hypotheses_examples() {
        let t0 = ContractionOp::new(zeros(2, 2)).unwrap();
        let t1 = ContractionOp::new(identity(2).scale(0.5)).unwrap();
        let rep = check_hypotheses(&t0, &t1, 2).unwrap();
        assert!((rep.difference_norm - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rep.kernel_dims[0], (2, 2));
        assert!(rep.kernels_balanced.iter().all(|&b| b));
        let same = check_hypotheses(&t1, &t1, 3).unwrap();
        assert_eq!(same.difference_norm, 0.0);
    }
}
