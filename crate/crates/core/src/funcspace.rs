//! Trigonometric polynomials on the unit circle and their functional calculus
//! on contractions, `phi(T) = phi_+(T) + phi_-(T^*)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{check_square, zeros, CMatrix, ContractionOp, C64};

/// Finitely supported Fourier series `sum_k c_k z^k`. Zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<(i64, f64, f64)>", try_from = "Vec<(i64, f64, f64)>")]
pub struct TrigPoly {
    coeffs: BTreeMap<i64, C64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Repeated indices are summed.
    pub fn from_coeffs(coeffs: impl IntoIterator<Item = (i64, C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            *map.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| *c != C64::new(0.0, 0.0));
        TrigPoly { coeffs: map }
    }

    pub fn monomial(k: i64, c: C64) -> Self {
        Self::from_coeffs([(k, c)])
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(0, c)
    }

    pub fn coeff(&self, k: i64) -> C64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    /// Ascending in `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `max |k|` over the support, 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        Self::from_coeffs(self.iter().chain(other.iter()))
    }

    pub fn scale(&self, factor: C64) -> TrigPoly {
        Self::from_coeffs(self.iter().map(|(k, c)| (k, c * factor)))
    }

    /// `(phi_+, phi_-)` with `phi(z) = phi_+(z) + phi_-(conj z)` on the circle.
    pub fn split_pm(&self) -> (TrigPoly, TrigPoly) {
        let plus = Self::from_coeffs(self.iter().filter(|&(k, _)| k >= 0));
        let minus = Self::from_coeffs(self.iter().filter(|&(k, _)| k < 0).map(|(k, c)| (-k, c)));
        (plus, minus)
    }

    /// Coefficients of `d^m/dt^m phi(e^{it})`.
    pub fn circle_derivative(&self, m: u32) -> TrigPoly {
        Self::from_coeffs(
            self.iter()
                .map(|(k, c)| (k, c * C64::new(0.0, k as f64).powu(m))),
        )
    }

    /// `sum |k|^n |c_k|`.
    pub fn fn_norm(&self, n: u32) -> f64 {
        self.iter()
            .map(|(k, c)| (k.unsigned_abs() as f64).powi(n as i32) * c.norm())
            .sum()
    }

    /// `phi(e^{it})`.
    pub fn eval_at(&self, t: f64) -> C64 {
        self.iter().map(|(k, c)| c * C64::from_polar(1.0, k as f64 * t)).sum()
    }

    pub fn eval_on_contraction(&self, t: &ContractionOp) -> CMatrix {
        eval_square(self, t.matrix())
    }

    /// Same calculus on an arbitrary square matrix: nonnegative powers of `X`,
    /// negative powers replaced by powers of `X^*`.
    pub fn eval_matrix(&self, x: &CMatrix) -> Result<CMatrix> {
        check_square(x, "functional calculus input")?;
        Ok(eval_square(self, x))
    }

    pub(crate) fn eval_square_matrix(&self, x: &CMatrix) -> CMatrix {
        eval_square(self, x)
    }
}

fn horner(coeff: impl Fn(usize) -> C64, top: usize, lowest: usize, x: &CMatrix) -> CMatrix {
    let d = x.nrows();
    let mut acc = zeros(d, d);
    for k in (lowest..=top).rev() {
        acc = &acc * x;
        let c = coeff(k);
        for j in 0..d {
            acc[(j, j)] += c;
        }
    }
    acc
}

fn eval_square(phi: &TrigPoly, x: &CMatrix) -> CMatrix {
    let d = x.nrows();
    let mut out = zeros(d, d);
    let max_pos = phi.coeffs.keys().filter(|&&k| k >= 0).max().copied();
    let max_neg = phi.coeffs.keys().filter(|&&k| k < 0).min().copied();
    if let Some(top) = max_pos {
        out += horner(|k| phi.coeff(k as i64), top as usize, 0, x);
    }
    if let Some(bottom) = max_neg {
        let xs = x.adjoint();
        let inner = horner(|k| phi.coeff(-(k as i64)), bottom.unsigned_abs() as usize, 1, &xs);
        out += inner * xs;
    }
    out
}

impl From<TrigPoly> for Vec<(i64, f64, f64)> {
    fn from(p: TrigPoly) -> Self {
        p.iter().map(|(k, c)| (k, c.re, c.im)).collect()
    }
}

impl TryFrom<Vec<(i64, f64, f64)>> for TrigPoly {
    type Error = String;

    fn try_from(raw: Vec<(i64, f64, f64)>) -> std::result::Result<Self, String> {
        let mut seen = std::collections::BTreeSet::new();
        for &(k, re, im) in &raw {
            if !re.is_finite() || !im.is_finite() {
                return Err(format!("coefficient {k} is not finite"));
            }
            if !seen.insert(k) {
                return Err(format!("coefficient {k} listed twice"));
            }
        }
        Ok(TrigPoly::from_coeffs(raw.into_iter().map(|(k, re, im)| (k, C64::new(re, im)))))
    }
}

/// Parse the `[[k, re, im], ...]` JSON form.
pub fn trig_poly_from_json(text: &str) -> Result<TrigPoly> {
    match serde_json::from_str(text) {
        Ok(p) => Ok(p),
        Err(e) => invalid(format!("bad trigonometric polynomial: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, fro_norm, identity};

    fn one() -> C64 {
        c64(1.0, 0.0)
    }

    #[test]
    fn split_examples() {
        let p = TrigPoly::from_coeffs([(1, one()), (-1, one())]);
        let (plus, minus) = p.split_pm();
        assert_eq!(plus, TrigPoly::monomial(1, one()));
        assert_eq!(minus, TrigPoly::monomial(1, one()));

        let (plus, minus) = TrigPoly::constant(one()).split_pm();
        assert_eq!(plus, TrigPoly::constant(one()));
        assert!(minus.is_zero());

        let (plus, minus) = TrigPoly::monomial(-3, c64(2.0, 0.0)).split_pm();
        assert!(plus.is_zero());
        assert_eq!(minus, TrigPoly::monomial(3, c64(2.0, 0.0)));
    }

    #[test]
    fn derivative_and_norm_examples() {
        let z = TrigPoly::monomial(1, one());
        assert_eq!(z.circle_derivative(1), TrigPoly::monomial(1, c64(0.0, 1.0)));
        let z2 = TrigPoly::monomial(2, one());
        assert_eq!(z2.circle_derivative(2), TrigPoly::monomial(2, c64(-4.0, 0.0)));
        assert_eq!(z2.circle_derivative(0), z2);

        assert_eq!(TrigPoly::constant(one()).fn_norm(3), 0.0);
        let p = TrigPoly::from_coeffs([(1, one()), (-1, one())]);
        assert_eq!(p.fn_norm(2), 2.0);
        assert_eq!(TrigPoly::monomial(2, c64(3.0, 0.0)).fn_norm(1), 6.0);
    }

    #[test]
    fn calculus_examples() {
        let t = CMatrix::from_row_slice(2, 2, &[c64(0.2, 0.1), c64(0.3, 0.0), c64(0.0, -0.4), c64(0.1, 0.0)]);
        let op = ContractionOp::new(t.clone()).unwrap();
        let z = TrigPoly::monomial(1, one());
        assert!(fro_norm(&(z.eval_on_contraction(&op) - &t)) < 1e-15);
        let zbar = TrigPoly::monomial(-1, one());
        assert!(fro_norm(&(zbar.eval_on_contraction(&op) - t.adjoint())) < 1e-15);
        let c = TrigPoly::constant(c64(2.0, -1.0));
        assert!(fro_norm(&(c.eval_on_contraction(&op) - identity(2) * c64(2.0, -1.0))) < 1e-15);

        let mixed = TrigPoly::from_coeffs([(3, c64(0.5, 0.0)), (-2, c64(0.0, 1.0))]);
        let expect = &t * &t * &t * c64(0.5, 0.0) + t.adjoint() * t.adjoint() * c64(0.0, 1.0);
        assert!(fro_norm(&(mixed.eval_on_contraction(&op) - expect)) < 1e-15);
    }

    #[test]
    fn json_form() {
        let p = TrigPoly::from_coeffs([(-2, c64(1.5, -0.5)), (4, c64(0.0, 2.0))]);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, "[[-2,1.5,-0.5],[4,0.0,2.0]]");
        assert_eq!(trig_poly_from_json(&text).unwrap(), p);
        assert!(trig_poly_from_json("[[1,1.0,0.0],[1,2.0,0.0]]").is_err());
        assert!(trig_poly_from_json("[[1,1.0]]").is_err());
    }
}
