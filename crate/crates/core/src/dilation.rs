//! Truncated minimal unitary dilations and the trace-transfer checks.
//!
//! Coordinates of the dilation space are ordered as
//! `[H2_- mode 0, ..., H2_- mode N-1, H, H2_+ mode 0, ..., H2_+ mode N-1]`,
//! each Hardy mode carrying `r` fiber coordinates in the defect basis of `T^*`
//! (minus side) or `T` (plus side).
//!
//! The truncated operators are compressions of the infinite ones to a
//! subspace that the `H`-column never leaves except through the top plus
//! mode, which never comes back. Powers and remainders are therefore exact
//! on `H` at any truncation level; `N >= deg(phi) + n + 2` is still enforced
//! so that the full dilated remainder is finitely supported inside the frame.

use crate::error::{invalid, Result, SsfError};
use crate::funcspace::TrigPoly;
use crate::linalg::{
    fro_norm, identity, set_block, trace, unitarity_residual, zeros, CMatrix, ContractionOp, C64,
};
use crate::pairs::{PairFrame, PairKind};
use crate::paths::{remainder_orders, DerivativeMethod, MultiplicativePath};

#[derive(Debug, Clone)]
pub struct HardyFrame {
    modes: usize,
    d: usize,
    fiber_minus: CMatrix,
    fiber_plus: CMatrix,
    polar: CMatrix,
}

impl HardyFrame {
    /// Frame carried by the defect spaces of `t`.
    pub fn new(t: &ContractionOp, modes: usize) -> Result<Self> {
        if modes == 0 {
            return invalid("truncation level N must be at least 1");
        }
        Ok(HardyFrame {
            modes,
            d: t.dim(),
            fiber_minus: t.defect_star_basis().clone(),
            fiber_plus: t.defect_basis().clone(),
            polar: t.polar().clone(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Fiber dimension on both sides.
    pub fn fiber_rank(&self) -> usize {
        self.fiber_plus.ncols()
    }

    pub fn fiber_minus(&self) -> &CMatrix {
        &self.fiber_minus
    }

    pub fn fiber_plus(&self) -> &CMatrix {
        &self.fiber_plus
    }

    pub fn total_dim(&self) -> usize {
        2 * self.modes * self.fiber_rank() + self.d
    }

    pub fn minus_offset(&self, mode: usize) -> usize {
        assert!(mode < self.modes);
        mode * self.fiber_rank()
    }

    pub fn h_offset(&self) -> usize {
        self.modes * self.fiber_rank()
    }

    pub fn plus_offset(&self, mode: usize) -> usize {
        assert!(mode < self.modes);
        self.h_offset() + self.d + mode * self.fiber_rank()
    }

    pub fn h_coords(&self) -> Vec<usize> {
        (self.h_offset()..self.h_offset() + self.d).collect()
    }

    pub fn plus_coords(&self, mode: usize) -> Vec<usize> {
        let o = self.plus_offset(mode);
        (o..o + self.fiber_rank()).collect()
    }

    pub fn minus_coords(&self, mode: usize) -> Vec<usize> {
        let o = self.minus_offset(mode);
        (o..o + self.fiber_rank()).collect()
    }

    /// Isometry identifying `H` with the middle block.
    pub fn embed_h(&self) -> CMatrix {
        let mut e = zeros(self.total_dim(), self.d);
        set_block(&mut e, self.h_offset(), 0, &identity(self.d));
        e
    }

    /// `P_H` as a `total x total` projection.
    pub fn projection_h(&self) -> CMatrix {
        let e = self.embed_h();
        &e * e.adjoint()
    }

    /// Truncated forward shift on one Hardy block (`N r x N r`).
    pub fn forward_shift(&self) -> CMatrix {
        let r = self.fiber_rank();
        let mut s = zeros(self.modes * r, self.modes * r);
        for j in 0..self.modes.saturating_sub(1) {
            set_block(&mut s, (j + 1) * r, j * r, &identity(r));
        }
        s
    }

    /// Whether a coordinate belongs to a Hardy mode at or above `mode`.
    fn is_high_mode(&self, coord: usize, mode: usize) -> bool {
        let r = self.fiber_rank();
        if r == 0 {
            return false;
        }
        if coord < self.h_offset() {
            coord / r >= mode
        } else if coord >= self.h_offset() + self.d {
            (coord - self.h_offset() - self.d) / r >= mode
        } else {
            false
        }
    }

    /// Shared shift skeleton with `middle` in the `H` block and `mode0` as the
    /// map from minus mode 0 to plus mode 0.
    fn skeleton(&self, middle: &CMatrix, mode0: &CMatrix) -> CMatrix {
        let n = self.total_dim();
        let r = self.fiber_rank();
        let mut u = zeros(n, n);
        let s = self.forward_shift();
        if r > 0 {
            // S_-^*: mode j -> mode j - 1.
            set_block(&mut u, 0, 0, &s.adjoint());
            set_block(&mut u, self.plus_offset(0), self.plus_offset(0), &s);
            set_block(&mut u, self.plus_offset(0), self.minus_offset(0), mode0);
        }
        set_block(&mut u, self.h_offset(), self.h_offset(), middle);
        u
    }

    fn check_dim(&self, m: &CMatrix, what: &str) -> Result<()> {
        if m.shape() != (self.d, self.d) {
            return invalid(format!("{what} must be {0}x{0}", self.d));
        }
        Ok(())
    }
}

/// `[[S_-^*, 0, 0], [D_{T*} P_-, T, 0], [-T^* P_-, D_T, S_+]]`.
pub fn dilate(t: &ContractionOp, modes: usize) -> Result<(HardyFrame, CMatrix)> {
    let frame = HardyFrame::new(t, modes)?;
    let p0 = &frame.fiber_minus;
    let q = &frame.fiber_plus;
    let mode0 = -(q.adjoint() * t.adjoint() * p0);
    let mut u = frame.skeleton(t.matrix(), &mode0);
    if frame.fiber_rank() > 0 {
        let h = frame.h_offset();
        set_block(&mut u, h, frame.minus_offset(0), &(t.defect_star() * p0));
        set_block(&mut u, frame.plus_offset(0), h, &(q.adjoint() * t.defect()));
    }
    Ok((frame, u))
}

/// `[[S_-^*, 0, 0], [0, V, 0], [-V_T^* P_-, 0, S_+]]` for the frame of `T`.
pub fn extend_unitary(v: &CMatrix, frame: &HardyFrame) -> Result<CMatrix> {
    frame.check_dim(v, "unitary")?;
    let residual = unitarity_residual(v);
    if residual > 1e-10 {
        return Err(SsfError::NotUnitary { residual });
    }
    Ok(extend_with(v, frame))
}

/// `[[S_-^*, 0, 0], [0, T1, 0], [-V_{T0}^* P_-, 0, S_+]]` for the frame of `T0`.
pub fn extend_contraction(t1: &ContractionOp, frame: &HardyFrame) -> Result<CMatrix> {
    frame.check_dim(t1.matrix(), "contraction")?;
    Ok(extend_with(t1.matrix(), frame))
}

fn extend_with(middle: &CMatrix, frame: &HardyFrame) -> CMatrix {
    let mode0 = -(frame.fiber_plus.adjoint() * frame.polar.adjoint() * &frame.fiber_minus);
    frame.skeleton(middle, &mode0)
}

/// A pair lifted to the dilation frame, with the lifted path from `start` to
/// `end`. `path.embed()` identifies the frame inside the generator's space.
#[derive(Debug, Clone)]
pub struct DilatedPair {
    kind: PairKind,
    frame: HardyFrame,
    start: CMatrix,
    end: CMatrix,
    path: MultiplicativePath,
}

impl DilatedPair {
    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn frame(&self) -> &HardyFrame {
        &self.frame
    }

    pub fn start(&self) -> &CMatrix {
        &self.start
    }

    pub fn end(&self) -> &CMatrix {
        &self.end
    }

    pub fn path(&self) -> &MultiplicativePath {
        &self.path
    }
}

/// Unitary pair `U_s = e^{isA} U0` with `U0 = extend_unitary(V)`,
/// `U1 = dilate(T)` and `A` the generator of `L` placed on `H + (plus mode 0)`.
pub fn dilate_cu_pair(pair: &PairFrame, modes: usize) -> Result<DilatedPair> {
    if pair.kind() != PairKind::ContractionUnitary {
        return invalid("dilate_cu_pair needs a (contraction, unitary) pair");
    }
    let (frame, u1) = dilate(pair.end(), modes)?;
    let u0 = extend_unitary(pair.start().matrix(), &frame)?;
    let mut coords = frame.h_coords();
    coords.extend(frame.plus_coords(0));
    let a = pair.generator().embed(frame.total_dim(), &coords)?;
    let path = MultiplicativePath::with_start(a, u0.clone(), identity(frame.total_dim()), &u0)?;
    connect(PairKind::ContractionUnitary, frame, u0, u1, path)
}

/// Lift of a (contraction, contraction) pair: the path runs inside
/// `F + D_{T1}` from `dilate(T0)` to `extend_contraction(T1)`, compressed to
/// the frame `F` of `T0`.
pub fn dilate_cc_pair(pair: &PairFrame, modes: usize) -> Result<DilatedPair> {
    if pair.kind() != PairKind::ContractionContraction {
        return invalid("dilate_cc_pair needs a (contraction, contraction) pair");
    }
    let (frame, v) = dilate(pair.start(), modes)?;
    let t = extend_contraction(pair.end(), &frame)?;
    let f = frame.total_dim();
    let r1 = pair.end().defect_rank();
    let mut coords = frame.h_coords();
    coords.extend(frame.plus_coords(0));
    coords.extend(f..f + r1);
    let m = pair.generator().embed(f + r1, &coords)?;
    let mut base = zeros(f + r1, f);
    set_block(&mut base, 0, 0, &v);
    let mut embed = zeros(f + r1, f);
    set_block(&mut embed, 0, 0, &identity(f));
    let path = MultiplicativePath::with_start(m, base, embed, &v)?;
    connect(PairKind::ContractionContraction, frame, v, t, path)
}

/// Lift matching the pair's kind.
pub fn dilate_pair(pair: &PairFrame, modes: usize) -> Result<DilatedPair> {
    match pair.kind() {
        PairKind::ContractionUnitary => dilate_cu_pair(pair, modes),
        PairKind::ContractionContraction => dilate_cc_pair(pair, modes),
    }
}

fn connect(
    kind: PairKind,
    frame: HardyFrame,
    start: CMatrix,
    end: CMatrix,
    path: MultiplicativePath,
) -> Result<DilatedPair> {
    let gap = fro_norm(&(path.value(1.0) - &end));
    if gap > 1e-8 {
        return Err(SsfError::Connection { gap });
    }
    Ok(DilatedPair {
        kind,
        frame,
        start,
        end,
        path,
    })
}

/// Smallest truncation level accepted for `(phi, n)`.
pub fn required_modes(phi: &TrigPoly, n: usize) -> usize {
    phi.degree() + n + 2
}

fn check_truncation(dilated: &DilatedPair, phi: &TrigPoly, n: usize) -> Result<()> {
    let required = required_modes(phi, n);
    if dilated.frame.modes() < required {
        return Err(SsfError::InsufficientTruncation {
            modes: dilated.frame.modes(),
            required,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceTransfer {
    pub order: usize,
    pub lhs: C64,
    pub rhs: C64,
    pub gap: f64,
}

/// Compressed remainder trace against the dilated one.
pub fn verify_trace_transfer(
    compressed: &PairFrame,
    dilated: &DilatedPair,
    phi: &TrigPoly,
    n: usize,
) -> Result<TraceTransfer> {
    if n < 2 {
        return invalid("remainder order n must be at least 2");
    }
    let mut all = verify_trace_transfer_orders(compressed, dilated, phi, n)?;
    Ok(all.pop().expect("one order"))
}

/// Trace transfer for all orders `2..=nmax` at once.
pub fn verify_trace_transfer_orders(
    compressed: &PairFrame,
    dilated: &DilatedPair,
    phi: &TrigPoly,
    nmax: usize,
) -> Result<Vec<TraceTransfer>> {
    if compressed.kind() != dilated.kind() {
        return invalid("compressed and dilated pairs are of different kinds");
    }
    check_truncation(dilated, phi, nmax)?;
    let method = DerivativeMethod::Auto;
    let small = remainder_orders(compressed.path(), compressed.end().matrix(), phi, nmax, method)?;
    let big = remainder_orders(&dilated.path, &dilated.end, phi, nmax, method)?;
    small
        .iter()
        .zip(&big)
        .enumerate()
        .map(|(j, (a, b))| {
            let lhs = trace(a)?;
            let rhs = trace(b)?;
            Ok(TraceTransfer {
                order: j + 2,
                lhs,
                rhs,
                gap: (lhs - rhs).norm(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerReport {
    /// Largest entry in a diagonal Hardy-mode block of the remainder.
    pub diag_block_max: f64,
    /// Trace of the compression of the remainder to the complement of `H`.
    pub corner_trace: C64,
    /// Largest entry in a row or column at Hardy mode `>= deg(phi) + n`.
    pub outside_support_max: f64,
}

/// Block structure of the dilated remainder away from `H`.
pub fn corner_check(dilated: &DilatedPair, phi: &TrigPoly, n: usize) -> Result<CornerReport> {
    check_truncation(dilated, phi, n)?;
    let r = remainder_orders(&dilated.path, &dilated.end, phi, n, DerivativeMethod::Auto)?
        .pop()
        .expect("one order");
    Ok(corner_of(&dilated.frame, &r, phi.degree() + n))
}

fn corner_of(frame: &HardyFrame, r: &CMatrix, support: usize) -> CornerReport {
    let mut diag_block_max: f64 = 0.0;
    let mut corner_trace = C64::new(0.0, 0.0);
    for mode in 0..frame.modes() {
        for coords in [frame.minus_coords(mode), frame.plus_coords(mode)] {
            for &i in &coords {
                corner_trace += r[(i, i)];
                for &j in &coords {
                    diag_block_max = diag_block_max.max(r[(i, j)].norm());
                }
            }
        }
    }
    let mut outside_support_max: f64 = 0.0;
    let n = frame.total_dim();
    for i in 0..n {
        for j in 0..n {
            if frame.is_high_mode(i, support) || frame.is_high_mode(j, support) {
                outside_support_max = outside_support_max.max(r[(i, j)].norm());
            }
        }
    }
    CornerReport {
        diag_block_max,
        corner_trace,
        outside_support_max,
    }
}
