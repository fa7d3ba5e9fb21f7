//! Multiplicative paths `s -> E^* e^{isG} B`, their Gateaux derivatives for
//! monomials `z^q`, and Taylor remainders.
//!
//! Two derivative routes exist and are kept independent. The combinatorial
//! route sums over compositions of `k` interleaved with powers of the start
//! operator. The series route expands the path as a truncated matrix power
//! series and raises it to the `|q|`-th power.

use crate::error::{invalid, Result, SsfError};
use crate::funcspace::TrigPoly;
use crate::linalg::{fro_norm, identity, op_norm, unitarity_residual, zeros, CMatrix, HermitianGenerator, C64};

const EMBED_TOL: f64 = 1e-10;
const START_TOL: f64 = 1e-10;
const CONTRACTIVE_TOL: f64 = 1e-10;
const CONNECT_TOL: f64 = 1e-8;
const CONTRACTIVE_SAMPLES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone)]
pub struct MultiplicativePath {
    generator: HermitianGenerator,
    base: CMatrix,
    embed: CMatrix,
    start: CMatrix,
}

impl MultiplicativePath {
    pub fn new(generator: HermitianGenerator, base: CMatrix, embed: CMatrix) -> Result<Self> {
        let big = generator.dim();
        let d = embed.ncols();
        if embed.nrows() != big || base.nrows() != big || base.ncols() != d {
            return invalid(format!(
                "path shapes disagree: generator {big}, base {}x{}, embed {}x{}",
                base.nrows(),
                base.ncols(),
                embed.nrows(),
                embed.ncols()
            ));
        }
        let res = unitarity_residual(&embed);
        if res > EMBED_TOL {
            return invalid(format!("embedding is not an isometry (residual {res:e})"));
        }
        let start = embed.adjoint() * &base;
        let path = MultiplicativePath {
            generator,
            base,
            embed,
            start,
        };
        for &s in &CONTRACTIVE_SAMPLES {
            let norm = op_norm(&path.value(s));
            if norm > 1.0 + CONTRACTIVE_TOL {
                return invalid(format!("path value at s = {s} has norm {norm}"));
            }
        }
        Ok(path)
    }

    /// As `new`, additionally requiring `E^* B` to match `declared`.
    pub fn with_start(
        generator: HermitianGenerator,
        base: CMatrix,
        embed: CMatrix,
        declared: &CMatrix,
    ) -> Result<Self> {
        let path = Self::new(generator, base, embed)?;
        if path.start.shape() != declared.shape() {
            return invalid("declared start operator has the wrong shape");
        }
        let gap = fro_norm(&(&path.start - declared));
        if gap > START_TOL {
            return invalid(format!("path start differs from declared start by {gap:e}"));
        }
        Ok(path)
    }

    /// `s -> e^{isA} U0` with no compression.
    pub fn full_space(generator: HermitianGenerator, start: CMatrix) -> Result<Self> {
        let d = start.nrows();
        Self::new(generator, start, identity(d))
    }

    pub fn constant(start: CMatrix) -> Result<Self> {
        let d = start.nrows();
        Self::full_space(HermitianGenerator::zero(d), start)
    }

    pub fn value(&self, s: f64) -> CMatrix {
        if s == 0.0 {
            return self.start.clone();
        }
        self.embed.adjoint() * (self.generator.exp_i(s) * &self.base)
    }

    pub fn generator(&self) -> &HermitianGenerator {
        &self.generator
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn embed(&self) -> &CMatrix {
        &self.embed
    }

    pub fn start(&self) -> &CMatrix {
        &self.start
    }

    /// Dimension of the compressed space.
    pub fn dim(&self) -> usize {
        self.start.nrows()
    }

    /// Dimension of the space the generator acts on.
    pub fn ext_dim(&self) -> usize {
        self.generator.dim()
    }
}

pub fn path_value(p: &MultiplicativePath, s: f64) -> CMatrix {
    p.value(s)
}

/// Truncated matrix power series `sum_{j <= order} C_j s^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorMatrixSeries {
    coeffs: Vec<CMatrix>,
}

impl TaylorMatrixSeries {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return invalid("series needs at least one coefficient");
        };
        let shape = first.shape();
        if coeffs.iter().any(|c| c.shape() != shape) {
            return invalid("series coefficients must share one shape");
        }
        Ok(TaylorMatrixSeries { coeffs })
    }

    /// `m + 0 s + ... + 0 s^order`.
    pub fn constant(m: CMatrix, order: usize) -> Self {
        let (r, c) = m.shape();
        let mut coeffs = vec![zeros(r, c); order + 1];
        coeffs[0] = m;
        TaylorMatrixSeries { coeffs }
    }

    /// `e^{isG} = sum_j (iG)^j s^j / j!`.
    pub fn exp_i(g: &CMatrix, order: usize) -> Self {
        let ig = g * C64::new(0.0, 1.0);
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut term = identity(g.nrows());
        coeffs.push(term.clone());
        for j in 1..=order {
            term = (&ig * term).unscale(j as f64);
            coeffs.push(term.clone());
        }
        TaylorMatrixSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, j: usize) -> &CMatrix {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coeffs[0].shape()
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.order(), other.order(), "series orders differ");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_compatible(other);
        TaylorMatrixSeries {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_compatible(other);
        TaylorMatrixSeries {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        TaylorMatrixSeries {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Adds `c I` to the constant term.
    pub fn shift(&self, c: C64) -> Self {
        let mut out = self.clone();
        let n = out.coeffs[0].nrows().min(out.coeffs[0].ncols());
        for j in 0..n {
            out.coeffs[0][(j, j)] += c;
        }
        out
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let m = self.order();
        let mut coeffs = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let mut acc = zeros(self.coeffs[0].nrows(), other.coeffs[0].ncols());
            for i in 0..=j {
                acc += &self.coeffs[i] * &other.coeffs[j - i];
            }
            coeffs.push(acc);
        }
        TaylorMatrixSeries { coeffs }
    }

    /// Left and right multiplication of every coefficient.
    pub fn sandwich(&self, left: &CMatrix, right: &CMatrix) -> Self {
        TaylorMatrixSeries {
            coeffs: self.coeffs.iter().map(|c| left * c * right).collect(),
        }
    }

    /// Coefficientwise adjoint (the series of the adjoint path for real `s`).
    pub fn adjoint(&self) -> Self {
        TaylorMatrixSeries {
            coeffs: self.coeffs.iter().map(|c| c.adjoint()).collect(),
        }
    }

    pub fn powu(&self, n: usize) -> Self {
        let (r, c) = self.shape();
        assert_eq!(r, c, "power of a non-square series");
        let mut acc = Self::constant(identity(r), self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiplicative inverse; requires an invertible constant term.
    pub fn inverse(&self) -> Result<Self> {
        let (r, c) = self.shape();
        if r != c {
            return invalid("inverse of a non-square series");
        }
        let inv0 = self.coeffs[0]
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| SsfError::Conditioning("constant term is singular".into()))?;
        let mut out: Vec<CMatrix> = vec![inv0.clone()];
        for m in 1..=self.order() {
            let mut acc = zeros(r, r);
            for j in 1..=m {
                acc += &self.coeffs[j] * &out[m - j];
            }
            out.push(-(&inv0 * acc));
        }
        Ok(TaylorMatrixSeries { coeffs: out })
    }
}

/// Series of the path value to the given order, built from the series of the
/// full exponential.
pub fn path_series(p: &MultiplicativePath, order: usize) -> TaylorMatrixSeries {
    TaylorMatrixSeries::exp_i(p.generator.matrix(), order).sandwich(&p.embed.adjoint(), &p.base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    Combinatorial,
    Taylor,
    /// Combinatorial while the term count stays small, series otherwise.
    Auto,
}

/// Largest parameters for which `Auto` uses the combinatorial sum.
pub const COMBINATORIAL_MAX_K: usize = 6;
pub const COMBINATORIAL_MAX_Q: usize = 16;

fn check_qk(q: i64, k: usize) -> Result<()> {
    if k == 0 {
        return invalid("derivative order k must be positive; use path_value for k = 0");
    }
    if q == 0 {
        return invalid("monomial index q must be nonzero");
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Compositions of `k` into `r` positive parts, lexicographic.
pub fn compositions(k: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r == 0 || k < r {
        return out;
    }
    let mut cur = Vec::with_capacity(r);
    fn rec(remaining: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(remaining);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=remaining - (parts - 1) {
            cur.push(first);
            rec(remaining - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    rec(k, r, &mut cur, &mut out);
    out
}

/// Weak compositions of `total` into `parts` nonnegative parts, lexicographic.
pub fn weak_compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    let mut cur = Vec::with_capacity(parts);
    fn rec(remaining: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(remaining);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 0..=remaining {
            cur.push(first);
            rec(remaining - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    rec(total, parts, &mut cur, &mut out);
    out
}

/// One summand of the combinatorial derivative: weight `k!/prod l_j!`,
/// parts `l_1..l_r`, start-operator exponents `alpha_0..alpha_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTerm {
    pub weight: f64,
    pub parts: Vec<usize>,
    pub exponents: Vec<usize>,
}

/// All summands for `d^k/ds^k z^q` with `q > 0`, in evaluation order.
pub fn lemma_terms(q: usize, k: usize) -> Vec<LemmaTerm> {
    let mut out = Vec::new();
    for r in 1..=k.min(q) {
        for parts in compositions(k, r) {
            let weight = factorial(k) / parts.iter().map(|&l| factorial(l)).product::<f64>();
            for exponents in weak_compositions(q - r, r + 1) {
                out.push(LemmaTerm {
                    weight,
                    parts: parts.clone(),
                    exponents,
                });
            }
        }
    }
    out
}

/// Binary-counter pairwise summation: the partial sums merged are always of
/// equal size, and the merge order depends only on the number of terms.
struct PairwiseSum {
    stack: Vec<(u32, CMatrix)>,
    rows: usize,
    cols: usize,
}

impl PairwiseSum {
    fn new(rows: usize, cols: usize) -> Self {
        PairwiseSum {
            stack: Vec::new(),
            rows,
            cols,
        }
    }

    fn push(&mut self, m: CMatrix) {
        let mut level = 0;
        let mut cur = m;
        while let Some((top, _)) = self.stack.last() {
            if *top != level {
                break;
            }
            let (_, prev) = self.stack.pop().unwrap();
            cur = prev + cur;
            level += 1;
        }
        self.stack.push((level, cur));
    }

    fn finish(self) -> CMatrix {
        let mut acc: Option<CMatrix> = None;
        for (_, m) in self.stack.into_iter().rev() {
            acc = Some(match acc {
                None => m,
                Some(a) => m + a,
            });
        }
        acc.unwrap_or_else(|| zeros(self.rows, self.cols))
    }
}

fn combinatorial_positive(p: &MultiplicativePath, q: usize, k: usize) -> CMatrix {
    let d = p.dim();
    let start = p.start();
    let ig = p.generator.matrix() * C64::new(0.0, 1.0);
    let embed_adj = p.embed.adjoint();
    // factors[l] = E^* (iG)^l B
    let mut factors = Vec::with_capacity(k + 1);
    let mut lifted = p.base.clone();
    factors.push(start.clone());
    for _ in 1..=k {
        lifted = &ig * lifted;
        factors.push(&embed_adj * &lifted);
    }
    let mut powers = Vec::with_capacity(q);
    powers.push(identity(d));
    for a in 1..q {
        powers.push(&powers[a - 1] * start);
    }
    // joined[a][l] = start^a * factors[l]
    let joined: Vec<Vec<CMatrix>> = powers
        .iter()
        .map(|pw| factors.iter().map(|f| pw * f).collect())
        .collect();

    struct Ctx<'a> {
        powers: &'a [CMatrix],
        joined: &'a [Vec<CMatrix>],
    }
    fn walk(
        ctx: &Ctx,
        parts: &[usize],
        pos: usize,
        remaining: usize,
        prefix: Option<&CMatrix>,
        weight: f64,
        acc: &mut PairwiseSum,
    ) {
        if pos == parts.len() {
            let tail = &ctx.powers[remaining];
            let term = match prefix {
                Some(pre) => pre * tail,
                None => tail.clone(),
            };
            acc.push(term.scale(weight));
            return;
        }
        for a in 0..=remaining {
            let block = &ctx.joined[a][parts[pos]];
            let next = match prefix {
                Some(pre) => pre * block,
                None => block.clone(),
            };
            walk(ctx, parts, pos + 1, remaining - a, Some(&next), weight, acc);
        }
    }

    let ctx = Ctx {
        powers: &powers,
        joined: &joined,
    };
    let mut acc = PairwiseSum::new(d, d);
    for r in 1..=k.min(q) {
        for parts in compositions(k, r) {
            let weight = factorial(k) / parts.iter().map(|&l| factorial(l)).product::<f64>();
            walk(&ctx, &parts, 0, q - r, None, weight, &mut acc);
        }
    }
    acc.finish()
}

/// `d^k/ds^k |_{s=0} path(s)^q` by the combinatorial sum; negative `q` is the
/// adjoint of the result for `-q`.
pub fn gateaux_monomial(p: &MultiplicativePath, q: i64, k: usize) -> Result<CMatrix> {
    check_qk(q, k)?;
    let out = combinatorial_positive(p, q.unsigned_abs() as usize, k);
    Ok(if q < 0 { out.adjoint() } else { out })
}

/// Same derivative from the truncated power series of the path.
pub fn taylor_oracle(p: &MultiplicativePath, q: i64, k: usize) -> Result<CMatrix> {
    check_qk(q, k)?;
    let mut series = path_series(p, k);
    if q < 0 {
        series = series.adjoint();
    }
    let power = series.powu(q.unsigned_abs() as usize);
    Ok(power.coeff(k).scale(factorial(k)))
}

pub fn gateaux(p: &MultiplicativePath, q: i64, k: usize, method: DerivativeMethod) -> Result<CMatrix> {
    match method {
        DerivativeMethod::Combinatorial => gateaux_monomial(p, q, k),
        DerivativeMethod::Taylor => taylor_oracle(p, q, k),
        DerivativeMethod::Auto => {
            if k <= COMBINATORIAL_MAX_K && q.unsigned_abs() as usize <= COMBINATORIAL_MAX_Q {
                gateaux_monomial(p, q, k)
            } else {
                taylor_oracle(p, q, k)
            }
        }
    }
}

fn check_connects(p: &MultiplicativePath, end: &CMatrix) -> Result<()> {
    if end.shape() != p.start.shape() {
        return invalid("end operator has the wrong shape");
    }
    let gap = fro_norm(&(p.value(1.0) - end));
    if gap > CONNECT_TOL || gap.is_nan() {
        return Err(SsfError::Connection { gap });
    }
    Ok(())
}

/// `phi(end) - phi(start) - sum_{k=1}^{n-1} (1/k!) d^k/ds^k phi(path(s))|_0`.
pub fn remainder(p: &MultiplicativePath, end: &CMatrix, phi: &TrigPoly, n: usize) -> Result<CMatrix> {
    remainder_with(p, end, phi, n, DerivativeMethod::Auto)
}

pub fn remainder_with(
    p: &MultiplicativePath,
    end: &CMatrix,
    phi: &TrigPoly,
    n: usize,
    method: DerivativeMethod,
) -> Result<CMatrix> {
    if n < 2 {
        return invalid("remainder order n must be at least 2");
    }
    let mut all = remainder_orders(p, end, phi, n, method)?;
    Ok(all.pop().expect("at least one order"))
}

/// Remainders of orders `2..=nmax`, sharing the derivative computations.
pub fn remainder_orders(
    p: &MultiplicativePath,
    end: &CMatrix,
    phi: &TrigPoly,
    nmax: usize,
    method: DerivativeMethod,
) -> Result<Vec<CMatrix>> {
    if nmax < 2 {
        return invalid("remainder order n must be at least 2");
    }
    check_connects(p, end)?;
    let mut current = phi.eval_square_matrix(end) - phi.eval_square_matrix(p.start());
    let mut out = Vec::with_capacity(nmax - 1);
    for k in 1..nmax {
        let mut deriv = zeros(p.dim(), p.dim());
        for (q, c) in phi.iter() {
            if q == 0 {
                continue;
            }
            deriv += gateaux(p, q, k, method)? * c;
        }
        current -= deriv.unscale(factorial(k));
        out.push(current.clone());
    }
    Ok(out)
}
