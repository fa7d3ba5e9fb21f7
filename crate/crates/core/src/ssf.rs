//! Fourier reconstruction of the order-`n` spectral shift function from
//! remainder traces of monomials, and the checks built on it.
//!
//! Pairing `d^n/dt^n z^q = (iq)^n z^q` against `xi` gives
//! `tr R_n(z^q) = 2 pi (iq)^n xi^(-q)` with `xi^(m) = (1/2pi) int xi e^{-imt}`,
//! which determines every coefficient except `xi^(0)`; that one is fixed to 0.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SsfError};
use crate::funcspace::TrigPoly;
use crate::linalg::{trace, CMatrix, HermitianGenerator, C64};
use crate::pairs::PairFrame;
use crate::paths::{remainder, remainder_orders, DerivativeMethod, MultiplicativePath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SsfJson", try_from = "SsfJson")]
pub struct SpectralShiftFn {
    order: usize,
    qmax: usize,
    coeffs: BTreeMap<i64, C64>,
}

#[derive(Serialize, Deserialize)]
struct SsfJson {
    order: usize,
    qmax: usize,
    coeffs: Vec<(i64, f64, f64)>,
}

impl From<SpectralShiftFn> for SsfJson {
    fn from(x: SpectralShiftFn) -> Self {
        SsfJson {
            order: x.order,
            qmax: x.qmax,
            coeffs: x.coeffs.iter().map(|(&q, c)| (q, c.re, c.im)).collect(),
        }
    }
}

impl TryFrom<SsfJson> for SpectralShiftFn {
    type Error = String;

    fn try_from(raw: SsfJson) -> std::result::Result<Self, String> {
        SpectralShiftFn::new(
            raw.order,
            raw.qmax,
            raw.coeffs.into_iter().map(|(q, re, im)| (q, C64::new(re, im))),
        )
        .map_err(|e| e.to_string())
    }
}

impl SpectralShiftFn {
    pub fn new(order: usize, qmax: usize, coeffs: impl IntoIterator<Item = (i64, C64)>) -> Result<Self> {
        if order < 2 {
            return invalid("spectral shift order must be at least 2");
        }
        let mut map = BTreeMap::new();
        for (q, c) in coeffs {
            if q == 0 {
                return invalid("the zeroth coefficient is fixed to 0 and cannot be set");
            }
            if q.unsigned_abs() as usize > qmax {
                return invalid(format!("coefficient {q} exceeds qmax {qmax}"));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return invalid(format!("coefficient {q} is not finite"));
            }
            if map.insert(q, c).is_some() {
                return invalid(format!("coefficient {q} given twice"));
            }
        }
        Ok(SpectralShiftFn { order, qmax, coeffs: map })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn qmax(&self) -> usize {
        self.qmax
    }

    /// `xi^(q)`; zero at `q = 0` and outside the table.
    pub fn coeff(&self, q: i64) -> C64 {
        self.coeffs.get(&q).copied().unwrap_or_default()
    }

    /// Ascending in `q`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs.iter().map(|(&q, &c)| (q, c))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max_q |xi^(q) - conj xi^(-q)|`; zero exactly when the partial sum is real.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        (1..=self.qmax as i64)
            .map(|q| (self.coeff(q) - self.coeff(-q).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Riemann sum of `|xi|` over `points` equally spaced nodes on `[0, 2pi)`.
    pub fn l1_proxy(&self, points: usize) -> f64 {
        if points == 0 {
            return 0.0;
        }
        let h = 2.0 * PI / points as f64;
        let grid: Vec<f64> = (0..points).map(|j| j as f64 * h).collect();
        ssf_eval(self, &grid).iter().map(|z| z.norm()).sum::<f64>() * h
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// `t,re,im` rows at 17 significant digits.
    pub fn samples_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("t,re,im\n");
        for (t, v) in grid.iter().zip(ssf_eval(self, grid)) {
            out.push_str(&format!("{t:.16e},{:.16e},{:.16e}\n", v.re, v.im));
        }
        out
    }
}

fn monomial_indices(qmax: usize) -> Vec<i64> {
    let q = qmax as i64;
    (-q..=q).filter(|&k| k != 0).collect()
}

/// `(q, tr R_n(z^q))` for `0 < |q| <= qmax`, ascending in `q`. Each `q` is an
/// independent work item; the result order does not depend on scheduling.
pub fn monomial_traces(
    path: &MultiplicativePath,
    end: &CMatrix,
    n: usize,
    qmax: usize,
    method: DerivativeMethod,
) -> Result<Vec<(i64, C64)>> {
    if n < 2 {
        return invalid("spectral shift order n must be at least 2");
    }
    if qmax < 1 {
        return invalid("qmax must be at least 1");
    }
    monomial_indices(qmax)
        .into_par_iter()
        .map(|q| {
            let phi = TrigPoly::monomial(q, C64::new(1.0, 0.0));
            let r = remainder_orders(path, end, &phi, n, method)?.pop().expect("one order");
            Ok((q, trace(&r)?))
        })
        .collect()
}

fn from_traces(n: usize, qmax: usize, traces: &[(i64, C64)]) -> Result<SpectralShiftFn> {
    SpectralShiftFn::new(
        n,
        qmax,
        traces.iter().map(|&(q, tr)| {
            let denom = 2.0 * PI * C64::new(0.0, q as f64).powu(n as u32);
            (-q, tr / denom)
        }),
    )
}

pub fn ssf_fourier(frame: &PairFrame, n: usize, qmax: usize) -> Result<SpectralShiftFn> {
    ssf_fourier_path(frame.path(), frame.end().matrix(), n, qmax)
}

/// Same reconstruction for an arbitrary connecting path.
pub fn ssf_fourier_path(path: &MultiplicativePath, end: &CMatrix, n: usize, qmax: usize) -> Result<SpectralShiftFn> {
    let traces = monomial_traces(path, end, n, qmax, DerivativeMethod::Auto)?;
    from_traces(n, qmax, &traces)
}

/// `2 pi sum_q phi^(q) (iq)^n xi^(-q)`.
pub fn pairing(phi: &TrigPoly, xi: &SpectralShiftFn) -> C64 {
    let n = xi.order() as u32;
    phi.iter()
        .filter(|&(q, _)| q != 0)
        .map(|(q, c)| c * C64::new(0.0, q as f64).powu(n) * xi.coeff(-q))
        .sum::<C64>()
        * (2.0 * PI)
}

/// `|tr R_n(phi) - 2 pi sum_q phi^(q) (iq)^n xi^(-q)|`.
pub fn trace_formula_check(frame: &PairFrame, phi: &TrigPoly, n: usize, xi: &SpectralShiftFn) -> Result<f64> {
    if phi.degree() > xi.qmax() {
        return invalid(format!("degree {} exceeds qmax {}", phi.degree(), xi.qmax()));
    }
    if n != xi.order() {
        return invalid(format!("order {n} differs from the spectral shift order {}", xi.order()));
    }
    let lhs = trace(&remainder(frame.path(), frame.end().matrix(), phi, n)?)?;
    Ok((lhs - pairing(phi, xi)).norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub order: usize,
    pub eps: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of `log |tr R_n(z^q)|` against `log eps` for the
/// unitary pairs `(U0, e^{i eps A} U0)`.
pub fn scaling_study(
    u0: &CMatrix,
    a: &HermitianGenerator,
    n: usize,
    eps: &[f64],
    q: i64,
) -> Result<ScalingFit> {
    if n < 2 {
        return invalid("order n must be at least 2");
    }
    if eps.len() < 3 {
        return invalid("need at least three perturbation sizes");
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return invalid("perturbation sizes must be positive");
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("perturbation sizes must be strictly decreasing");
    }
    if q == 0 {
        return invalid("monomial index q must be nonzero");
    }
    let phi = TrigPoly::monomial(q, C64::new(1.0, 0.0));
    let mut magnitudes = Vec::with_capacity(eps.len());
    for &e in eps {
        let path = MultiplicativePath::full_space(a.scaled(e)?, u0.clone())?;
        let end = path.value(1.0);
        let m = trace(&remainder(&path, &end, &phi, n)?)?.norm();
        if m < 1e-14 {
            return Err(SsfError::IllConditionedFit(format!(
                "remainder trace {m:e} at eps = {e:e} is below 1e-14"
            )));
        }
        magnitudes.push(m);
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = magnitudes.iter().map(|m| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ScalingFit {
        order: n,
        eps: eps.to_vec(),
        magnitudes,
        slope: sxy / sxx,
    })
}

/// Partial Fourier sum `sum_q xi^(q) e^{iqt}` at each grid point.
pub fn ssf_eval(xi: &SpectralShiftFn, grid: &[f64]) -> Vec<C64> {
    grid.iter()
        .map(|&t| xi.iter().map(|(q, c)| c * C64::from_polar(1.0, q as f64 * t)).sum())
        .collect()
}
