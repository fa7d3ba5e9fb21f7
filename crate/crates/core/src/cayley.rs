//! Dissipative matrices and their Cayley transforms, the `p_{k,q}`
//! polynomials of the circle-to-line change of variables, the real-line
//! spectral shift function and the nested antiderivative `zeta_n`.
//!
//! Conventions: `T = -(A + i)(A - i)^{-1}`, `A = i - 2i (T + 1)^{-1}`,
//! `e^{it} = (i + lambda)/(i - lambda)` with `lambda = -tan(t/2)`, and
//! `psi(A) = phi(T)` for `psi(lambda) = phi((i + lambda)/(i - lambda))`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Result, SsfError};
use crate::funcspace::TrigPoly;
use crate::linalg::{
    abs_value, check_square, fro_norm, herm_eig, hermitize, identity, max_abs, real_diag, schatten_norm, svd,
    CMatrix, ContractionOp, C64, DEFAULT_RANK_TOL, I,
};
use crate::pairs::{build_cc_pair, PairFrame};
use crate::paths::{path_series, remainder_with, DerivativeMethod, TaylorMatrixSeries};
use crate::ssf::{ssf_eval, SpectralShiftFn};

const DISSIPATIVE_TOL: f64 = 1e-10;
const RESOLVENT_TOL: f64 = 1e-12;
const MINUS_ONE_TOL: f64 = 1e-10;
const CAYLEY_NORM_SLACK: f64 = 1e-10;

fn smallest_singular(m: &CMatrix) -> f64 {
    svd(m).sigma.last().copied().unwrap_or(f64::INFINITY)
}

fn inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| SsfError::Conditioning(format!("{what} is singular")))
}

/// Square matrix with `Im A = (A - A^*)/2i <= 0`.
#[derive(Debug, Clone)]
pub struct DissipativeOp {
    matrix: CMatrix,
    im_part: CMatrix,
}

impl DissipativeOp {
    /// The sign condition is checked against `1e-10 * max(1, ||A||_F)`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix, "dissipative operator")?;
        let im_part = hermitize(&((&matrix - matrix.adjoint()) * C64::new(0.0, -0.5)));
        let top = herm_eig(&im_part)?.values.last().copied().unwrap_or(0.0);
        let scale = fro_norm(&matrix).max(1.0);
        if top > DISSIPATIVE_TOL * scale {
            return invalid(format!("Im A has eigenvalue {top:e} > 0; not dissipative"));
        }
        let d = matrix.nrows();
        let sigma = smallest_singular(&(&matrix - identity(d) * I));
        if sigma <= RESOLVENT_TOL {
            return Err(SsfError::Conditioning(format!(
                "A - i is numerically singular (smallest singular value {sigma:e})"
            )));
        }
        Ok(DissipativeOp { matrix, im_part })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn im_part(&self) -> &CMatrix {
        &self.im_part
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `T = -(A + i)(A - i)^{-1}`.
pub fn cayley(a: &DissipativeOp) -> Result<ContractionOp> {
    let d = a.dim();
    let id = identity(d);
    let resolvent = inverse(&(a.matrix() - &id * I), "A - i")?;
    let t = -((a.matrix() + &id * I) * resolvent);
    ContractionOp::with_tolerances(t, DEFAULT_RANK_TOL, CAYLEY_NORM_SLACK)
}

fn inverse_cayley_matrix(t: &CMatrix) -> Result<CMatrix> {
    let d = t.nrows();
    let id = identity(d);
    let shifted = t + &id;
    let sigma = smallest_singular(&shifted);
    if sigma <= MINUS_ONE_TOL {
        return Err(SsfError::MinusOneInSpectrum { sigma });
    }
    Ok(&id * I - inverse(&shifted, "T + 1")? * C64::new(0.0, 2.0))
}

/// `A = i - 2i (T + 1)^{-1}`.
pub fn inverse_cayley(t: &ContractionOp) -> Result<DissipativeOp> {
    DissipativeOp::new(inverse_cayley_matrix(t.matrix())?)
}

/// `psi(A) = phi(cayley(A))`.
pub fn psi_of(a: &DissipativeOp, phi: &TrigPoly) -> Result<CMatrix> {
    Ok(phi.eval_on_contraction(&cayley(a)?))
}

/// The Mobius map `(i + lambda)/(i - lambda)` onto the circle.
pub fn mobius(lambda: f64) -> C64 {
    (I + lambda) / (I - lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectResiduals {
    /// `||D_T - 2|(-Im A)^{1/2}(A - i)^{-1}|||_F`.
    pub defect: f64,
    /// `||D_{T*} - 2|(-Im A)^{1/2}(A^* + i)^{-1}|||_F`.
    pub defect_star: f64,
}

pub fn defect_identities_check(a: &DissipativeOp) -> Result<DefectResiduals> {
    let t = cayley(a)?;
    let d = a.dim();
    let id = identity(d);
    let eig = herm_eig(&-a.im_part())?;
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let root = &eig.vectors * real_diag(&roots) * eig.vectors.adjoint();
    let r1 = inverse(&(a.matrix() - &id * I), "A - i")?;
    let r2 = inverse(&(a.matrix().adjoint() + &id * I), "A^* + i")?;
    let lhs1 = abs_value(&(&root * r1)).scale(2.0);
    let lhs2 = abs_value(&(&root * r2)).scale(2.0);
    Ok(DefectResiduals {
        defect: fro_norm(&(t.defect() - lhs1)),
        defect_star: fro_norm(&(t.defect_star() - lhs2)),
    })
}

/// Real polynomial, ascending coefficients, no trailing zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        RealPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::new(vec![1.0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| j as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|j| self.coeffs.get(j).unwrap_or(&0.0) + other.coeffs.get(j).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }
}

/// `p_{k,q}` for `1 <= q <= nmax`, `0 <= k <= q - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PkqTable {
    nmax: usize,
    table: BTreeMap<(usize, usize), RealPolynomial>,
}

#[derive(Serialize)]
struct PkqEntry<'a> {
    q: usize,
    k: usize,
    coefficients: &'a [f64],
}

impl PkqTable {
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn get(&self, k: usize, q: usize) -> Option<&RealPolynomial> {
        self.table.get(&(k, q))
    }

    /// `[{q, k, coefficients}]` ordered by `q`, then `k`.
    pub fn to_json(&self) -> String {
        let mut entries: Vec<PkqEntry> = self
            .table
            .iter()
            .map(|(&(k, q), p)| PkqEntry {
                q,
                k,
                coefficients: p.coefficients(),
            })
            .collect();
        entries.sort_by_key(|e| (e.q, e.k));
        serde_json::to_string_pretty(&entries).expect("serializable")
    }
}

pub fn pkq_polynomials(nmax: usize) -> Result<PkqTable> {
    if nmax < 1 {
        return invalid("nmax must be at least 1");
    }
    let one_plus = RealPolynomial::new(vec![1.0, 0.0, 1.0]);
    let two_lambda = RealPolynomial::new(vec![0.0, 2.0]);
    let mut table = BTreeMap::new();
    table.insert((0, 1), RealPolynomial::one());
    for q in 2..=nmax {
        for k in 0..q {
            let prev = |j: usize| table.get(&(j, q - 1)).cloned().unwrap_or_default();
            let p = if k == 0 {
                one_plus.mul(&prev(0))
            } else if k <= q - 2 {
                one_plus
                    .mul(&prev(k).add(&prev(k - 1).derivative()))
                    .add(&two_lambda.mul(&prev(k - 1)))
            } else {
                one_plus
                    .mul(&prev(q - 2).derivative())
                    .add(&two_lambda.mul(&prev(q - 2)))
            };
            table.insert((k, q), p.scale(-0.5));
        }
    }
    Ok(PkqTable { nmax, table })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn rising(a: usize, j: usize) -> f64 {
    (0..j).map(|l| (a + l) as f64).product()
}

/// `d^j/dlambda^j` of `((i + lambda)/(i - lambda))^m`, exactly.
///
/// With `w = -1 + 2i/(i - lambda)` (and `1/w = -1 + 2i/(i + lambda)` for
/// negative `m`) the power expands binomially into terms `(i -+ lambda)^{-a}`
/// whose derivatives are closed form.
pub fn mobius_power_derivative(m: i64, j: usize, lambda: f64) -> C64 {
    let mm = m.unsigned_abs() as usize;
    let two_i = C64::new(0.0, 2.0);
    let (base, sign) = if m >= 0 { (I - lambda, 1.0f64) } else { (I + lambda, -1.0) };
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..=mm {
        if j > 0 && a == 0 {
            continue;
        }
        let coeff = binomial(mm, a) * if (mm - a) % 2 == 0 { 1.0 } else { -1.0 };
        let deriv = rising(a, j) * sign.powi(j as i32);
        acc += two_i.powu(a as u32) * coeff * deriv * base.powi(-((a + j) as i32));
    }
    acc
}

/// Max relative residual of the chain-rule identity for `phi = z^m` at order `q`.
pub fn chain_rule_check(table: &PkqTable, m: i64, q: usize, ts: &[f64]) -> Result<f64> {
    if q < 1 || q > table.nmax() {
        return invalid(format!("order q = {q} outside 1..={}", table.nmax()));
    }
    let mut worst: f64 = 0.0;
    for &t in ts {
        let wrapped = t.rem_euclid(2.0 * PI);
        if (wrapped - PI).abs() < 0.1 {
            return invalid(format!("sample t = {t} is within 0.1 of the pole at pi"));
        }
        let lambda = -(t / 2.0).tan();
        let lhs = C64::new(0.0, m as f64).powu(q as u32) * C64::from_polar(1.0, m as f64 * t);
        let dl = -(1.0 + lambda * lambda) / 2.0;
        let mut sum = C64::new(0.0, 0.0);
        for k in 0..q {
            let p = table.get(k, q).expect("table entry").eval(lambda);
            sum += mobius_power_derivative(m, q - k, lambda) * p;
        }
        let rhs = sum * dl;
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    Ok(worst)
}

/// `eta_n(lambda) = xi_n(-2 arctan(lambda) mod 2pi)`.
pub fn real_line_ssf(xi: &SpectralShiftFn, lambdas: &[f64]) -> Vec<C64> {
    let ts: Vec<f64> = lambdas
        .iter()
        .map(|&l| (-2.0 * l.atan()).rem_euclid(2.0 * PI))
        .collect();
    ssf_eval(xi, &ts)
}

/// Reading of the `k = 0` term of `zeta_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaConvention {
    /// `eta^n_{0,0} = p_{0,n}`, as printed.
    #[default]
    Printed,
    /// `eta^n_{0,0} = p_{0,n} eta_n`, which is what integration by parts yields.
    Integrated,
}

/// Index of `0` in a uniform grid, and the step.
fn check_grid(grid: &[f64]) -> Result<(usize, f64)> {
    if grid.len() < 2 {
        return invalid("grid needs at least two points");
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) {
        return invalid("grid must be increasing");
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return invalid("grid is not uniform");
        }
    }
    match grid.iter().position(|&x| x.abs() <= 1e-9 * h) {
        Some(j) => Ok((j, h)),
        None => invalid("grid does not contain 0"),
    }
}

/// Trapezoid antiderivative vanishing at index `origin`.
fn cumulative_from(values: &[C64], origin: usize, h: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for j in origin + 1..values.len() {
        out[j] = out[j - 1] + (values[j - 1] + values[j]) * (0.5 * h);
    }
    for j in (0..origin).rev() {
        out[j] = out[j + 1] - (values[j] + values[j + 1]) * (0.5 * h);
    }
    out
}

/// `zeta_n = sum_k (-1)^k eta^n_{k,k}` sampled on a uniform grid through 0.
pub fn zeta_n(
    eta: &[C64],
    grid: &[f64],
    table: &PkqTable,
    n: usize,
    convention: ZetaConvention,
) -> Result<Vec<C64>> {
    if n < 2 {
        return invalid("zeta_n needs n >= 2");
    }
    if n > table.nmax() {
        return invalid(format!("p table only reaches q = {}", table.nmax()));
    }
    if eta.len() != grid.len() {
        return invalid("eta samples and grid differ in length");
    }
    let (origin, h) = check_grid(grid)?;
    let mut zeta = vec![C64::new(0.0, 0.0); grid.len()];
    for k in 0..n {
        let p = table.get(k, n).expect("table entry");
        let weighted: Vec<C64> = grid.iter().zip(eta).map(|(&l, &e)| e * p.eval(l)).collect();
        let term = if k == 0 {
            match convention {
                ZetaConvention::Printed => grid.iter().map(|&l| C64::new(p.eval(l), 0.0)).collect(),
                ZetaConvention::Integrated => weighted,
            }
        } else {
            let mut cur = weighted;
            for _ in 0..k {
                cur = cumulative_from(&cur, origin, h);
            }
            cur
        };
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (z, v) in zeta.iter_mut().zip(term) {
            *z += v * sign;
        }
    }
    Ok(zeta)
}

fn trapezoid(values: &[C64], h: f64) -> C64 {
    let n = values.len();
    if n < 2 {
        return C64::new(0.0, 0.0);
    }
    let inner: C64 = values[1..n - 1].iter().sum();
    (inner + (values[0] + values[n - 1]) * 0.5) * h
}

/// Integration-by-parts consistency of `zeta_n`: relative gap between
/// `int psi^(n) zeta_n` and `int (sum_k p_{k,n} psi^(n-k)) eta_n` for the
/// bump `psi = (1 - (lambda/a)^2)^{n+2}` on `|lambda| < a`, where `a` is 90%
/// of the grid's half-width.
pub fn integration_by_parts_gap(
    eta: &[C64],
    grid: &[f64],
    table: &PkqTable,
    n: usize,
    convention: ZetaConvention,
) -> Result<f64> {
    let zeta = zeta_n(eta, grid, table, n, convention)?;
    let (_, h) = check_grid(grid)?;
    let a = 0.9 * grid[0].abs().min(grid[grid.len() - 1].abs());
    if !(a > 0.0) {
        return invalid("grid must extend on both sides of 0");
    }
    let unit = RealPolynomial::new(vec![1.0, 0.0, -1.0 / (a * a)]);
    let mut psi = RealPolynomial::one();
    for _ in 0..n + 2 {
        psi = psi.mul(&unit);
    }
    let mut derivs = vec![psi];
    for j in 1..=n {
        let next = derivs[j - 1].derivative();
        derivs.push(next);
    }
    let bump = |j: usize, l: f64| if l.abs() < a { derivs[j].eval(l) } else { 0.0 };
    let lhs: Vec<C64> = grid.iter().zip(&zeta).map(|(&l, &z)| z * bump(n, l)).collect();
    let rhs: Vec<C64> = grid
        .iter()
        .zip(eta)
        .map(|(&l, &e)| {
            let s: f64 = (0..n)
                .map(|k| table.get(k, n).expect("table entry").eval(l) * bump(n - k, l))
                .sum();
            e * s
        })
        .collect();
    let lhs = trapezoid(&lhs, h);
    let rhs = trapezoid(&rhs, h);
    Ok((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300))
}

#[derive(Debug, Clone)]
pub struct DissipativeReport {
    /// Max entrywise gap between the two remainders.
    pub residual: f64,
    pub phi_remainder: CMatrix,
    pub psi_remainder: CMatrix,
    /// `||A_{s=1} - A1||_F` with `A_s` recovered from the path.
    pub endpoint_roundtrip: f64,
    pub pair: PairFrame,
}

const PATH_SAMPLES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Compares the remainder of `psi(A_s) = phi(T_s)` computed on the
/// dissipative side (through `A_s = i - 2i (T_s + 1)^{-1}` as a power
/// series and back through the Cayley transform) with the contraction-side
/// remainder of `phi = z^q`.
pub fn dissipative_remainder_check(
    a0: &DissipativeOp,
    a1: &DissipativeOp,
    n: usize,
    q: i64,
) -> Result<DissipativeReport> {
    if n < 2 {
        return invalid("order n must be at least 2");
    }
    if q == 0 {
        return invalid("monomial index q must be nonzero");
    }
    if a0.dim() != a1.dim() {
        return invalid("dimension mismatch");
    }
    let t0 = cayley(a0)?;
    let t1 = cayley(a1)?;
    let pair = build_cc_pair(&t0, &t1)?;
    let path = pair.path();
    let d = pair.dim();
    let id = identity(d);
    for &s in &PATH_SAMPLES {
        let sigma = smallest_singular(&(path.value(s) + &id));
        if sigma <= MINUS_ONE_TOL {
            return Err(SsfError::MinusOneInSpectrum { sigma });
        }
    }
    let phi = TrigPoly::monomial(q, C64::new(1.0, 0.0));
    let phi_remainder = remainder_with(path, t1.matrix(), &phi, n, DerivativeMethod::Combinatorial)?;

    let order = n - 1;
    let t_series = path_series(path, order);
    let a_series: TaylorMatrixSeries = t_series
        .shift(C64::new(1.0, 0.0))
        .inverse()?
        .scale(C64::new(0.0, -2.0))
        .shift(I);
    let back = a_series
        .shift(I)
        .mul(&a_series.shift(-I).inverse()?)
        .scale(C64::new(-1.0, 0.0));
    let back = if q < 0 { back.adjoint() } else { back };
    let power = back.powu(q.unsigned_abs() as usize);

    let a_start = DissipativeOp::new(inverse_cayley_matrix(&path.value(0.0))?)?;
    let a_end = DissipativeOp::new(inverse_cayley_matrix(&path.value(1.0))?)?;
    let mut psi_remainder = psi_of(&a_end, &phi)? - psi_of(&a_start, &phi)?;
    for k in 1..=order {
        psi_remainder -= power.coeff(k);
    }
    Ok(DissipativeReport {
        residual: max_abs(&(&psi_remainder - &phi_remainder)),
        endpoint_roundtrip: fro_norm(&(a_end.matrix() - a1.matrix())),
        phi_remainder,
        psi_remainder,
        pair,
    })
}

/// For Hermitian `A`, `psi(A)` through the Cayley transform against
/// `Q diag(psi(lambda_j)) Q^*`.
pub fn hermitian_calculus_check(a: &CMatrix, phi: &TrigPoly) -> Result<f64> {
    let eig = herm_eig(a)?;
    let op = DissipativeOp::new(hermitize(a))?;
    let via_cayley = psi_of(&op, phi)?;
    let values: Vec<C64> = eig.values.iter().map(|&l| phi.eval_at(mobius(l).arg())).collect();
    let direct = &eig.vectors * crate::linalg::complex_diag(&values) * eig.vectors.adjoint();
    Ok(max_abs(&(via_cayley - direct)))
}

/// Schatten norms entering the dissipative hypotheses: `||A1 - A0||_n` and
/// `||Im A_j||_{ceil(n/2)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativeHypotheses {
    pub difference_norm: f64,
    pub resolvent_difference_norm: f64,
    pub im_norms: [f64; 2],
    pub im_index: u32,
}

pub fn dissipative_hypotheses(a0: &DissipativeOp, a1: &DissipativeOp, n: u32) -> Result<DissipativeHypotheses> {
    let d = a0.dim();
    let id = identity(d);
    let r0 = inverse(&(a0.matrix() - &id * I), "A0 - i")?;
    let r1 = inverse(&(a1.matrix() - &id * I), "A1 - i")?;
    let im_index = n.div_ceil(2).max(1);
    Ok(DissipativeHypotheses {
        difference_norm: schatten_norm(&(a1.matrix() - a0.matrix()), n)?,
        resolvent_difference_norm: schatten_norm(&(r1 - r0), n)?,
        im_norms: [schatten_norm(a0.im_part(), im_index)?, schatten_norm(a1.im_part(), im_index)?],
        im_index,
    })
}
