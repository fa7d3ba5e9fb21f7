//! Dense complex linear algebra on top of nalgebra.
//!
//! Everything is built on two kernels: the Hermitian eigensolver and the SVD.
//! Residuals reported by the `*_residual` helpers are Frobenius norms, which
//! bound the operator norm from above.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result, SsfError};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Slack allowed on the operator norm of a contraction.
pub const CONTRACTION_TOL: f64 = 1e-12;
/// Default threshold below which a defect eigenvalue counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Singular values below this are treated as kernel directions.
pub const KERNEL_TOL: f64 = 1e-10;
/// `1 - sigma^2` below this is roundoff on an isometric direction, not defect.
const DEFECT_FLOOR: f64 = 1e-13;
/// Angles closer than this to the branch cut trigger a warning.
const BRANCH_WARN: f64 = 1e-8;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    let mut m = zeros(values.len(), values.len());
    for (j, &v) in values.iter().enumerate() {
        m[(j, j)] = c64(v, 0.0);
    }
    m
}

pub fn complex_diag(values: &[C64]) -> CMatrix {
    let mut m = zeros(values.len(), values.len());
    for (j, &v) in values.iter().enumerate() {
        m[(j, j)] = v;
    }
    m
}

/// Copy `block` into `target` with its top-left corner at `(row, col)`.
pub fn set_block(target: &mut CMatrix, row: usize, col: usize, block: &CMatrix) {
    if block.nrows() == 0 || block.ncols() == 0 {
        return;
    }
    target
        .view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

pub fn block(source: &CMatrix, row: usize, col: usize, rows: usize, cols: usize) -> CMatrix {
    source.view((row, col), (rows, cols)).into_owned()
}

/// Isometry `[I_d; 0]` of shape `total x d`.
pub fn leading_isometry(total: usize, d: usize) -> CMatrix {
    let mut m = zeros(total, d);
    for j in 0..d {
        m[(j, j)] = C64::new(1.0, 0.0);
    }
    m
}

pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).sigma.first().copied().unwrap_or(0.0)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        invalid(format!("{what} has non-finite entries"))
    }
}

pub fn check_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    check_finite(m, what)
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    fro_norm(&(m - m.adjoint()))
}

/// `||U*U - I||_F`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    fro_norm(&(u.adjoint() * u - identity(u.ncols())))
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn matrix_power(m: &CMatrix, k: usize) -> CMatrix {
    let mut acc = identity(m.nrows());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

/// Thin SVD `m = u * diag(sigma) * w^*` with `sigma` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub w: CMatrix,
}

pub fn svd(m: &CMatrix) -> Svd {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Svd {
            u: zeros(rows, 0),
            sigma: Vec::new(),
            w: zeros(cols, 0),
        };
    }
    if rows < cols {
        let t = jacobi_svd(m.adjoint());
        return Svd {
            u: t.w,
            sigma: t.sigma,
            w: t.u,
        };
    }
    jacobi_svd(m.clone())
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix. nalgebra's
/// bidiagonal SVD returns wrong factors for some complex inputs with repeated
/// singular values, so it is not used.
fn jacobi_svd(mut a: CMatrix) -> Svd {
    let (rows, cols) = a.shape();
    let mut v = identity(cols);
    let eps = f64::EPSILON;
    let tol = eps * rows as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, C64::new(0.0, 0.0));
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)] * phase);
                    a[(i, p)] = x * c - y * s;
                    a[(i, q)] = x * s + y * c;
                }
                for i in 0..cols {
                    let (x, y) = (v[(i, p)], v[(i, q)] * phase);
                    v[(i, p)] = x * c - y * s;
                    v[(i, q)] = x * s + y * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let top = norms[order[0]];
    let mut u = zeros(rows, cols);
    let mut w = zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        w.set_column(dst, &v.column(src));
        if s > 0.0 && s > top * eps * rows as f64 {
            u.set_column(dst, &a.column(src).unscale(s));
        } else {
            missing.push(dst);
        }
    }
    // Left vectors of (numerically) zero columns: complete to an orthonormal
    // set with the coordinate vector of largest residual.
    for dst in missing {
        let mut best = zeros(rows, 1);
        let mut best_norm = -1.0;
        for e in 0..rows {
            let mut x = zeros(rows, 1);
            x[(e, 0)] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                let proj = u.adjoint() * &x;
                x -= &u * proj;
            }
            let n = x.norm();
            if n > best_norm {
                best_norm = n;
                best = x;
            }
        }
        u.set_column(dst, &best.column(0).unscale(best_norm));
    }
    Svd { u, sigma, w }
}

/// `|X| = (X^*X)^{1/2}`, computed from the SVD rather than a square root.
pub fn abs_value(x: &CMatrix) -> CMatrix {
    let s = svd(x);
    &s.w * real_diag(&s.sigma) * s.w.adjoint()
}

#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn reconstruct(&self) -> CMatrix {
        &self.vectors * real_diag(&self.values) * self.vectors.adjoint()
    }
}

pub fn herm_eig(m: &CMatrix) -> Result<HermEig> {
    check_square(m, "Hermitian input")?;
    let res = hermitian_residual(m);
    if res > 1e-8 {
        return invalid(format!("matrix is not Hermitian (residual {res:e})"));
    }
    Ok(herm_eig_unchecked(&hermitize(m)))
}

fn herm_eig_unchecked(h: &CMatrix) -> HermEig {
    let n = h.nrows();
    if n == 0 {
        return HermEig {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let se = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
        values.push(se.eigenvalues[src]);
    }
    HermEig { values, vectors }
}

/// Polar factor `X Y^*` of `X S Y^*`, valid for square input.
fn unitary_factor(m: &CMatrix) -> (CMatrix, f64) {
    let s = svd(m);
    let min = s.sigma.last().copied().unwrap_or(1.0);
    (&s.u * s.w.adjoint(), min)
}

/// SVD of a square matrix with the left kernel vectors rotated so that the
/// polar factor acts as the identity on `ker T` whenever `ker T = ker T^*`.
fn aligned_svd(t: &CMatrix) -> Svd {
    let mut s = svd(t);
    let null: Vec<usize> = (0..s.sigma.len()).filter(|&j| s.sigma[j] <= KERNEL_TOL).collect();
    if null.is_empty() {
        return s;
    }
    let first = null[0];
    let k = null.len();
    let u_null = s.u.columns(first, k).into_owned();
    let w_null = s.w.columns(first, k).into_owned();
    let (rot, min) = unitary_factor(&(u_null.adjoint() * &w_null));
    if min >= 0.5 {
        let rotated = u_null * rot;
        s.u.columns_mut(first, k).copy_from(&rotated);
    }
    s
}

/// A validated contraction together with its defect data, all derived from
/// one SVD `T = U diag(sigma) W^*`.
#[derive(Debug, Clone)]
pub struct ContractionOp {
    matrix: CMatrix,
    defect: CMatrix,
    defect_star: CMatrix,
    defect_basis: CMatrix,
    defect_star_basis: CMatrix,
    polar: CMatrix,
    modulus: CMatrix,
    singular_values: Vec<f64>,
    rank_tol: f64,
}

impl ContractionOp {
    pub fn new(t: CMatrix) -> Result<Self> {
        Self::with_tolerances(t, DEFAULT_RANK_TOL, CONTRACTION_TOL)
    }

    pub fn with_rank_tol(t: CMatrix, rank_tol: f64) -> Result<Self> {
        Self::with_tolerances(t, rank_tol, CONTRACTION_TOL)
    }

    /// `norm_slack` is the allowed excess of `||T||` over 1.
    pub fn with_tolerances(t: CMatrix, rank_tol: f64, norm_slack: f64) -> Result<Self> {
        check_square(&t, "contraction")?;
        if !(rank_tol >= 0.0) {
            return invalid("rank_tol must be nonnegative");
        }
        let d = t.nrows();
        let s = aligned_svd(&t);
        let norm = s.sigma.first().copied().unwrap_or(0.0);
        if norm > 1.0 + norm_slack {
            return Err(SsfError::NotContraction { norm });
        }
        let defect_vals: Vec<f64> = s
            .sigma
            .iter()
            .map(|&sig| {
                let gap = (1.0 - sig) * (1.0 + sig);
                if gap <= DEFECT_FLOOR {
                    0.0
                } else {
                    let v = gap.sqrt();
                    if v <= rank_tol {
                        0.0
                    } else {
                        v
                    }
                }
            })
            .collect();
        let support: Vec<usize> = (0..d).filter(|&j| defect_vals[j] > 0.0).collect();
        let mut defect_basis = zeros(d, support.len());
        let mut defect_star_basis = zeros(d, support.len());
        for (dst, &src) in support.iter().enumerate() {
            defect_basis.set_column(dst, &s.w.column(src));
            defect_star_basis.set_column(dst, &s.u.column(src));
        }
        let dv = real_diag(&defect_vals);
        let defect = hermitize(&(&s.w * &dv * s.w.adjoint()));
        let defect_star = hermitize(&(&s.u * &dv * s.u.adjoint()));
        let polar = &s.u * s.w.adjoint();
        let modulus = hermitize(&(&s.w * real_diag(&s.sigma) * s.w.adjoint()));
        Ok(ContractionOp {
            matrix: t,
            defect,
            defect_star,
            defect_basis,
            defect_star_basis,
            polar,
            modulus,
            singular_values: s.sigma,
            rank_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `D_T = (I - T^*T)^{1/2}`.
    pub fn defect(&self) -> &CMatrix {
        &self.defect
    }

    /// `D_{T^*} = (I - TT^*)^{1/2}`.
    pub fn defect_star(&self) -> &CMatrix {
        &self.defect_star
    }

    /// Orthonormal columns spanning `ran D_T`.
    pub fn defect_basis(&self) -> &CMatrix {
        &self.defect_basis
    }

    /// Orthonormal columns spanning `ran D_{T^*}`; equals `V_T * defect_basis`.
    pub fn defect_star_basis(&self) -> &CMatrix {
        &self.defect_star_basis
    }

    pub fn defect_rank(&self) -> usize {
        self.defect_basis.ncols()
    }

    /// Unitary polar factor `V_T` with `T = V_T |T|`.
    pub fn polar(&self) -> &CMatrix {
        &self.polar
    }

    /// `|T| = (T^*T)^{1/2}`.
    pub fn modulus(&self) -> &CMatrix {
        &self.modulus
    }

    /// Descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn kernel_dim(&self) -> usize {
        self.singular_values.iter().filter(|&&s| s <= KERNEL_TOL).count()
    }

    pub fn adjoint(&self) -> CMatrix {
        self.matrix.adjoint()
    }
}

pub fn defect(t: &CMatrix, rank_tol: f64) -> Result<ContractionOp> {
    ContractionOp::with_rank_tol(t.clone(), rank_tol)
}

/// Unitary `V_T` with `T = V_T |T|`; zero singular values get phase 1.
pub fn polar_unitary(t: &CMatrix) -> Result<CMatrix> {
    check_square(t, "polar input")?;
    let s = aligned_svd(t);
    Ok(&s.u * s.w.adjoint())
}

/// Hermitian matrix with cached eigendecomposition and spectrum in `(-pi, pi]`.
#[derive(Debug, Clone)]
pub struct HermitianGenerator {
    matrix: CMatrix,
    spectrum: Vec<f64>,
    eigenvectors: CMatrix,
}

const LEFT_END_TOL: f64 = 1e-12;

fn check_spectrum(values: &[f64]) -> Result<()> {
    use std::f64::consts::PI;
    for &v in values {
        if !(v > -PI + LEFT_END_TOL && v <= PI + LEFT_END_TOL) {
            return invalid(format!("generator eigenvalue {v} outside (-pi, pi]"));
        }
    }
    Ok(())
}

impl HermitianGenerator {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m, "generator")?;
        let res = hermitian_residual(&m);
        if res > 1e-10 {
            return invalid(format!("generator is not Hermitian (residual {res:e})"));
        }
        let eig = herm_eig_unchecked(&hermitize(&m));
        check_spectrum(&eig.values)?;
        Ok(HermitianGenerator {
            matrix: m,
            spectrum: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    fn from_parts(eigenvectors: CMatrix, spectrum: Vec<f64>) -> Self {
        let matrix = hermitize(&(&eigenvectors * real_diag(&spectrum) * eigenvectors.adjoint()));
        HermitianGenerator {
            matrix,
            spectrum,
            eigenvectors,
        }
    }

    pub fn zero(d: usize) -> Self {
        HermitianGenerator {
            matrix: zeros(d, d),
            spectrum: vec![0.0; d],
            eigenvectors: identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn is_zero(&self) -> bool {
        self.spectrum.iter().all(|&v| v == 0.0)
    }

    /// `e^{isA}` through the cached eigendecomposition.
    pub fn exp_i(&self, s: f64) -> CMatrix {
        let phases: Vec<C64> = self
            .spectrum
            .iter()
            .map(|&v| C64::from_polar(1.0, s * v))
            .collect();
        &self.eigenvectors * complex_diag(&phases) * self.eigenvectors.adjoint()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let spectrum: Vec<f64> = self.spectrum.iter().map(|&v| v * factor).collect();
        check_spectrum(&spectrum)?;
        Ok(HermitianGenerator {
            matrix: self.matrix.scale(factor),
            spectrum,
            eigenvectors: self.eigenvectors.clone(),
        })
    }

    /// Zero-pad into a `dim`-dimensional space, placing this generator on the
    /// listed coordinates (in order).
    pub fn embed(&self, dim: usize, coords: &[usize]) -> Result<Self> {
        if coords.len() != self.dim() {
            return invalid("embedding coordinate count differs from generator dimension");
        }
        let mut seen = vec![false; dim];
        for &c in coords {
            if c >= dim || seen[c] {
                return invalid("embedding coordinates must be distinct and in range");
            }
            seen[c] = true;
        }
        let mut vectors = zeros(dim, dim);
        let mut spectrum = Vec::with_capacity(dim);
        for j in 0..self.dim() {
            for (i, &c) in coords.iter().enumerate() {
                vectors[(c, j)] = self.eigenvectors[(i, j)];
            }
            spectrum.push(self.spectrum[j]);
        }
        let mut col = self.dim();
        for (c, used) in seen.iter().enumerate() {
            if !used {
                vectors[(c, col)] = C64::new(1.0, 0.0);
                spectrum.push(0.0);
                col += 1;
            }
        }
        let mut matrix = zeros(dim, dim);
        for (i, &ci) in coords.iter().enumerate() {
            for (j, &cj) in coords.iter().enumerate() {
                matrix[(ci, cj)] = self.matrix[(i, j)];
            }
        }
        Ok(HermitianGenerator {
            matrix,
            spectrum,
            eigenvectors: vectors,
        })
    }
}

pub fn unitary_exp(a: &HermitianGenerator, s: f64) -> CMatrix {
    a.exp_i(s)
}

fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI + LEFT_END_TOL {
        r = PI;
    }
    r
}

/// Bit-reversed visiting order of `0..m` (m a power of two), so the first
/// few candidates are spread around the circle.
fn bit_reversed(m: usize) -> Vec<usize> {
    let bits = m.trailing_zeros();
    (0..m)
        .map(|j| if bits == 0 { 0 } else { j.reverse_bits() >> (usize::BITS - bits) })
        .collect()
}

/// Hermitian `A` with `e^{iA} = U` and spectrum in `(-pi, pi]`.
///
/// The unitary is rotated by a phase `e^{-i beta}` chosen so that `-1` is far
/// from its spectrum, mapped to a Hermitian matrix by the Cayley transform,
/// diagonalised, and the angles are shifted back by `beta`.
pub fn principal_log_unitary(u: &CMatrix) -> Result<HermitianGenerator> {
    use std::f64::consts::PI;
    check_square(u, "unitary")?;
    let residual = unitarity_residual(u);
    if residual > 1e-8 {
        return Err(SsfError::NotUnitary { residual });
    }
    let d = u.nrows();
    if d == 0 {
        return Ok(HermitianGenerator::zero(0));
    }
    let id = identity(d);
    // Among 4d equally spaced shifts one is at chord distance at least
    // 2 sin(3 pi / 8d) from the spectrum; accept anything half as good.
    let m = (4 * d).next_power_of_two();
    let target = (3.0 * PI / (8.0 * d as f64)).sin();
    let mut best: Option<(f64, f64)> = None;
    for j in bit_reversed(m) {
        let beta = 2.0 * PI * j as f64 / m as f64;
        let shifted = u * C64::from_polar(1.0, -beta);
        let gap = svd(&(&id + &shifted)).sigma.last().copied().unwrap_or(0.0);
        if best.map_or(true, |(g, _)| gap > g) {
            best = Some((gap, beta));
        }
        if gap >= target {
            break;
        }
    }
    let (_, beta) = best.expect("at least one shift candidate");
    let shifted = u * C64::from_polar(1.0, -beta);
    let plus = &id + &shifted;
    let minus = &id - &shifted;
    // H = i (I - U')(I + U')^{-1}; the factors commute.
    let inv = plus
        .lu()
        .try_inverse()
        .ok_or_else(|| SsfError::Conditioning("I + e^{-i beta} U is singular".into()))?;
    let h = hermitize(&((minus * inv) * I));
    let eig = herm_eig_unchecked(&h);
    let mut pairs: Vec<(f64, usize)> = eig
        .values
        .iter()
        .enumerate()
        .map(|(j, &lam)| (wrap_angle(2.0 * lam.atan() + beta), j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let near_cut = pairs.iter().filter(|(t, _)| PI - t.abs() < BRANCH_WARN).count();
    if near_cut > 0 {
        log::warn!(
            "principal log: {near_cut} eigenvalue(s) within {BRANCH_WARN:e} of the branch cut at -1; +pi chosen"
        );
    }
    let mut vectors = zeros(d, d);
    let mut spectrum = Vec::with_capacity(d);
    for (dst, &(theta, src)) in pairs.iter().enumerate() {
        vectors.set_column(dst, &eig.vectors.column(src));
        spectrum.push(theta);
    }
    Ok(HermitianGenerator::from_parts(vectors, spectrum))
}

/// `(sum sigma_i^n)^{1/n}`.
pub fn schatten_norm(x: &CMatrix, n: u32) -> Result<f64> {
    if n == 0 {
        return invalid("Schatten index must be positive");
    }
    check_finite(x, "Schatten input")?;
    let sigma = svd(x).sigma;
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    let p = n as f64;
    let sum: f64 = sigma.iter().map(|&s| (s / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}

pub fn trace(x: &CMatrix) -> Result<C64> {
    check_square(x, "trace input")?;
    Ok(x.diagonal().iter().sum())
}
