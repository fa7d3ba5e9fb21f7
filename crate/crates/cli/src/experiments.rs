//! One runner per mode. Every runner is deterministic in the config: random
//! instances come from per-index ChaCha streams, parallel work is collected
//! in index order, and floats are written with fixed formatting.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use ssf_core::cayley::{
    cayley, chain_rule_check, defect_identities_check, dissipative_hypotheses, dissipative_remainder_check,
    integration_by_parts_gap, inverse_cayley, pkq_polynomials, real_line_ssf, zeta_n, DissipativeOp, ZetaConvention,
};
use ssf_core::dilation::{corner_check, dilate, dilate_pair, required_modes, verify_trace_transfer_orders};
use ssf_core::linalg::{block, c64, fro_norm, identity, max_abs, unitarity_residual, CMatrix, ContractionOp, C64};
use ssf_core::pairs::{build_cc_pair, build_cu_pair, build_pair, PairFrame, PairKind};
use ssf_core::paths::{gateaux_monomial, taylor_oracle};
use ssf_core::random::InstanceRng;
use ssf_core::ssf::{scaling_study, ssf_fourier, trace_formula_check};
use ssf_core::{HermitianGenerator, SsfError, TrigPoly};

use crate::config::{ConventionName, ExperimentConfig, Mode};
use crate::{write_file, CliError, Outcome};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Check {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

pub fn check_table(checks: &[Check]) -> String {
    let mut s = format!("{:<24} {:>12} {:>10}  result\n", "check", "value", "tolerance");
    for c in checks {
        let _ = writeln!(
            s,
            "{:<24} {:>12.3e} {:>10.1e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    s
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn pair_of(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn kind_name(kind: PairKind) -> &'static str {
    match kind {
        PairKind::ContractionUnitary => "contraction_unitary",
        PairKind::ContractionContraction => "contraction_contraction",
    }
}

/// Runs `f` for every index in parallel; the first error by index wins.
fn per_index<T: Send>(count: usize, f: impl Fn(usize) -> Result<T, CliError> + Sync + Send) -> Result<Vec<T>, CliError> {
    let results: Vec<Result<T, CliError>> = (0..count).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

pub fn dispatch(mode: Mode, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    match mode {
        Mode::Verify => run_verify(cfg, out),
        Mode::Ssf => run_ssf(cfg, out),
        Mode::Dilate => run_dilate(cfg, out),
        Mode::Cayley => run_cayley(cfg, out),
        Mode::Scaling => run_scaling(cfg, out),
    }
}

fn endpoints(cfg: &ExperimentConfig) -> Result<(CMatrix, CMatrix), CliError> {
    let mut rng = InstanceRng::instance(cfg.seed, 0);
    let start = rng.strict_contraction(cfg.dim);
    let end = rng.strict_contraction(cfg.dim);
    let start = cfg.matrix("start")?.unwrap_or(start);
    let end = cfg.matrix("end")?.unwrap_or(end);
    if start.shape() != end.shape() {
        return Err(CliError::Config("start and end differ in shape".into()));
    }
    Ok((start, end))
}

fn pair_checks(pair: &PairFrame) -> Vec<Check> {
    let (g0, g1) = pair.endpoint_gaps();
    vec![
        Check::new("pair_unitarity", pair.unitarity_residual(), 1e-10),
        Check::new("pair_log", pair.log_residual(), 1e-9),
        Check::new("path_endpoints", g0.max(g1), 1e-8),
    ]
}

#[derive(Serialize)]
struct SsfSummary {
    kind: &'static str,
    dim: usize,
    extended_dim: usize,
    order: usize,
    qmax: usize,
    max_abs_coeff: f64,
    conjugate_symmetry_defect: f64,
    l1_proxy: f64,
    checks: Vec<Check>,
}

fn run_ssf(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let (start, end) = endpoints(cfg)?;
    let pair = build_pair(&start, &end)?;
    let xi = ssf_fourier(&pair, cfg.n, cfg.qmax)?;
    let grid: Vec<f64> = (0..cfg.grid.points).map(|j| j as f64 * TAU / cfg.grid.points as f64).collect();
    write_file(out, "ssf.json", &format!("{}\n", xi.to_json()))?;
    write_file(out, "ssf_samples.csv", &xi.samples_csv(&grid))?;

    let mut checks = pair_checks(&pair);
    let phi = cfg.phi.clone().unwrap_or_else(|| InstanceRng::instance(cfg.seed, 1).trig_poly(cfg.qmax));
    checks.push(Check::new("trace_formula", trace_formula_check(&pair, &phi, cfg.n, &xi)?, 1e-8));
    let summary = SsfSummary {
        kind: kind_name(pair.kind()),
        dim: pair.dim(),
        extended_dim: pair.extended_dim(),
        order: xi.order(),
        qmax: xi.qmax(),
        max_abs_coeff: xi.max_abs_coeff(),
        conjugate_symmetry_defect: xi.conjugate_symmetry_defect(),
        l1_proxy: xi.l1_proxy(cfg.grid.points),
        checks,
    };
    Ok(Outcome {
        stdout: to_json(&summary),
        pass: all_pass(&summary.checks),
    })
}

#[derive(Serialize)]
struct TransferEntry {
    /// Monomial index, or `None` for the configured test function.
    q: Option<i64>,
    order: usize,
    lhs: [f64; 2],
    rhs: [f64; 2],
    gap: f64,
}

#[derive(Serialize)]
struct CornerEntry {
    q: Option<i64>,
    corner_trace: [f64; 2],
    diag_block_max: f64,
    outside_support_max: f64,
}

#[derive(Serialize)]
struct DilateReport {
    kind: &'static str,
    modes: usize,
    dilated_dim: usize,
    n: usize,
    transfer: Vec<TransferEntry>,
    corners: Vec<CornerEntry>,
    checks: Vec<Check>,
}

/// `max_{k <= 2N} ||P_H U^k|_H - T^k||_F`.
fn power_compression_gap(t: &ContractionOp, modes: usize) -> Result<f64, CliError> {
    let (frame, u) = dilate(t, modes)?;
    let d = frame.dim();
    let h = frame.h_offset();
    let mut p = identity(frame.total_dim());
    let mut tp = identity(d);
    let mut worst: f64 = 0.0;
    for _ in 0..=2 * modes {
        worst = worst.max(fro_norm(&(block(&p, h, h, d, d) - &tp)));
        p = &p * &u;
        tp = &tp * t.matrix();
    }
    Ok(worst)
}

fn run_dilate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let (start, end) = endpoints(cfg)?;
    let pair = build_pair(&start, &end)?;
    let q = cfg.qmax as i64;
    let phis: Vec<(Option<i64>, TrigPoly)> = match &cfg.phi {
        Some(phi) => vec![(None, phi.clone())],
        None => (-q..=q)
            .filter(|&k| k != 0)
            .map(|k| (Some(k), TrigPoly::monomial(k, c64(1.0, 0.0))))
            .collect(),
    };
    let degree = phis.iter().map(|(_, p)| p.degree()).max().unwrap_or(0);
    let modes = cfg.modes.unwrap_or(required_modes(&TrigPoly::monomial(degree as i64, c64(1.0, 0.0)), cfg.n));
    let dil = dilate_pair(&pair, modes)?;
    let rows = per_index(phis.len(), |j| {
        let (label, phi) = &phis[j];
        let transfer = verify_trace_transfer_orders(&pair, &dil, phi, cfg.n)?;
        let corner = corner_check(&dil, phi, cfg.n)?;
        Ok((*label, transfer, corner))
    })?;
    let mut transfer = Vec::new();
    let mut corners = Vec::new();
    for (label, tt, c) in rows {
        transfer.extend(tt.into_iter().map(|t| TransferEntry {
            q: label,
            order: t.order,
            lhs: pair_of(t.lhs),
            rhs: pair_of(t.rhs),
            gap: t.gap,
        }));
        corners.push(CornerEntry {
            q: label,
            corner_trace: pair_of(c.corner_trace),
            diag_block_max: c.diag_block_max,
            outside_support_max: c.outside_support_max,
        });
    }
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let checks = vec![
        Check::new("trace_transfer", max_of(&mut transfer.iter().map(|t| t.gap)), 1e-8),
        Check::new(
            "corner_trace",
            max_of(&mut corners.iter().map(|c| c64(c.corner_trace[0], c.corner_trace[1]).norm())),
            1e-10,
        ),
        Check::new("remainder_support", max_of(&mut corners.iter().map(|c| c.outside_support_max)), 1e-12),
        Check::new("power_compression", power_compression_gap(pair.end(), modes)?, 1e-12),
    ];
    let report = DilateReport {
        kind: kind_name(pair.kind()),
        modes,
        dilated_dim: dil.frame().total_dim(),
        n: cfg.n,
        transfer,
        corners,
        checks,
    };
    write_file(out, "dilate_report.json", &to_json(&report))?;
    Ok(Outcome {
        stdout: check_table(&report.checks),
        pass: all_pass(&report.checks),
    })
}

/// Sample points for the chain-rule check, clear of the pole at `pi`.
pub fn chain_rule_points() -> Vec<f64> {
    (0..20).map(|j| -2.9 + j as f64 * 0.29).collect()
}

fn pkq_degree_mismatches(nmax: usize) -> Result<usize, CliError> {
    let table = pkq_polynomials(nmax)?;
    let mut bad = 0;
    for q in 1..=nmax {
        for k in 0..q {
            if table.get(k, q).and_then(|p| p.degree()) != Some(2 * (q - 1) - k) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

fn chain_rule_worst(nmax: usize) -> Result<f64, CliError> {
    let table = pkq_polynomials(nmax)?;
    let ts = chain_rule_points();
    let mut worst: f64 = 0.0;
    for m in -5i64..=5 {
        for q in 1..=nmax.min(4) {
            worst = worst.max(chain_rule_check(&table, m, q, &ts)?);
        }
    }
    Ok(worst)
}

fn roundtrip_gap(a: &DissipativeOp) -> Result<f64, CliError> {
    let back = inverse_cayley(&cayley(a)?)?;
    Ok(fro_norm(&(back.matrix() - a.matrix())))
}

#[derive(Serialize)]
struct CayleyReport {
    n: usize,
    qmax: usize,
    remainder_residuals: Vec<(i64, f64)>,
    difference_norm: f64,
    resolvent_difference_norm: f64,
    im_norms: [f64; 2],
    im_schatten_index: u32,
    zeta_convention: &'static str,
    ibp_gap_printed: f64,
    ibp_gap_integrated: f64,
    lambda_points: usize,
    checks: Vec<Check>,
}

fn run_cayley(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut rng = InstanceRng::instance(cfg.seed, 0);
    let a0 = rng.dissipative(cfg.dim);
    let a1 = rng.dissipative(cfg.dim);
    let a0 = DissipativeOp::new(cfg.matrix("a0")?.unwrap_or(a0))?;
    let a1 = DissipativeOp::new(cfg.matrix("a1")?.unwrap_or(a1))?;
    if a0.dim() != a1.dim() {
        return Err(CliError::Config("a0 and a1 differ in dimension".into()));
    }
    let nmax = cfg.n.max(4);
    let table = pkq_polynomials(nmax)?;
    write_file(out, "pkq.json", &format!("{}\n", table.to_json()))?;

    let q = cfg.qmax as i64;
    let qs: Vec<i64> = (-q..=q).filter(|&k| k != 0).collect();
    let remainder_residuals: Vec<(i64, f64)> = per_index(qs.len(), |j| {
        Ok((qs[j], dissipative_remainder_check(&a0, &a1, cfg.n, qs[j])?.residual))
    })?;
    let pair = build_cc_pair(&cayley(&a0)?, &cayley(&a1)?)?;
    let xi = ssf_fourier(&pair, cfg.n, cfg.qmax)?;
    let steps = (cfg.grid.lambda_max / cfg.grid.lambda_step).round() as i64;
    let lambdas: Vec<f64> = (-steps..=steps).map(|j| j as f64 * cfg.grid.lambda_step).collect();
    let eta = real_line_ssf(&xi, &lambdas);
    let convention = match cfg.zeta_convention {
        ConventionName::Printed => ZetaConvention::Printed,
        ConventionName::Integrated => ZetaConvention::Integrated,
    };
    let zeta = zeta_n(&eta, &lambdas, &table, cfg.n, convention)?;
    let mut csv = String::from("lambda,eta_re,eta_im,zeta_re,zeta_im\n");
    for ((l, e), z) in lambdas.iter().zip(&eta).zip(&zeta) {
        let _ = writeln!(csv, "{l:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", e.re, e.im, z.re, z.im);
    }
    write_file(out, "zeta.csv", &csv)?;
    let ibp_gap_printed = integration_by_parts_gap(&eta, &lambdas, &table, cfg.n, ZetaConvention::Printed)?;
    let ibp_gap_integrated = integration_by_parts_gap(&eta, &lambdas, &table, cfg.n, ZetaConvention::Integrated)?;

    let defects = [defect_identities_check(&a0)?, defect_identities_check(&a1)?];
    let hyp = dissipative_hypotheses(&a0, &a1, cfg.n as u32)?;
    let checks = vec![
        Check::new("pkq_degree", pkq_degree_mismatches(nmax)? as f64, 0.0),
        Check::new("chain_rule", chain_rule_worst(nmax)?, 1e-7),
        Check::new("cayley_roundtrip", roundtrip_gap(&a0)?.max(roundtrip_gap(&a1)?), 1e-10),
        Check::new(
            "defect_identities",
            defects.iter().map(|r| r.defect.max(r.defect_star)).fold(0.0, f64::max),
            1e-9,
        ),
        Check::new(
            "dissipative_remainder",
            remainder_residuals.iter().map(|r| r.1).fold(0.0, f64::max),
            1e-10,
        ),
    ];
    let report = CayleyReport {
        n: cfg.n,
        qmax: cfg.qmax,
        remainder_residuals,
        difference_norm: hyp.difference_norm,
        resolvent_difference_norm: hyp.resolvent_difference_norm,
        im_norms: hyp.im_norms,
        im_schatten_index: hyp.im_index,
        zeta_convention: match convention {
            ZetaConvention::Printed => "printed",
            ZetaConvention::Integrated => "integrated",
        },
        ibp_gap_printed,
        ibp_gap_integrated,
        lambda_points: lambdas.len(),
        checks,
    };
    write_file(out, "cayley_report.json", &to_json(&report))?;
    Ok(Outcome {
        stdout: check_table(&report.checks),
        pass: all_pass(&report.checks),
    })
}

#[derive(Serialize)]
struct ScalingReport {
    n: usize,
    q: i64,
    eps: Vec<f64>,
    slopes: Vec<f64>,
    mean_slope: f64,
    checks: Vec<Check>,
}

fn run_scaling(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let given_u0 = cfg.matrix("u0")?;
    let given_a = cfg.matrix("a")?;
    if let Some(u) = &given_u0 {
        let residual = unitarity_residual(u);
        if u.nrows() != u.ncols() || residual > 1e-10 {
            return Err(SsfError::NotUnitary { residual }.into());
        }
    }
    let fits = per_index(cfg.instances, |i| {
        let mut rng = InstanceRng::instance(cfg.seed, i as u64);
        let u0 = rng.unitary(cfg.dim);
        let a = rng.hermitian_with_norm(cfg.dim, 1.0);
        let u0 = given_u0.clone().unwrap_or(u0);
        let a = HermitianGenerator::new(given_a.clone().unwrap_or(a))?;
        Ok(scaling_study(&u0, &a, cfg.n, &cfg.scaling.eps, cfg.scaling.q)?)
    })?;
    let mut csv = String::from("instance,eps,magnitude\n");
    for (i, f) in fits.iter().enumerate() {
        for (e, m) in f.eps.iter().zip(&f.magnitudes) {
            let _ = writeln!(csv, "{i},{e:.16e},{m:.16e}");
        }
    }
    write_file(out, "scaling.csv", &csv)?;
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let worst = slopes.iter().map(|s| (s - cfg.n as f64).abs()).fold(0.0, f64::max);
    let report = ScalingReport {
        n: cfg.n,
        q: cfg.scaling.q,
        eps: cfg.scaling.eps.clone(),
        mean_slope: slopes.iter().sum::<f64>() / slopes.len() as f64,
        slopes,
        checks: vec![Check::new("slope_offset", worst, 0.3)],
    };
    write_file(out, "scaling.json", &to_json(&report))?;
    Ok(Outcome {
        stdout: check_table(&report.checks),
        pass: all_pass(&report.checks),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct InstanceMetrics {
    oracle: f64,
    cu_unitarity: f64,
    cu_log: f64,
    cu_endpoints: f64,
    cc_unitarity: f64,
    cc_log: f64,
    cc_endpoints: f64,
    powers: f64,
    transfer: f64,
    corner: f64,
    formula: f64,
    roundtrip: f64,
    defect: f64,
    remainder: f64,
    zero: f64,
}

fn test_contraction(rng: &mut InstanceRng, d: usize, flavor: usize) -> Result<ContractionOp, CliError> {
    let t = match flavor % 3 {
        0 => rng.strict_contraction(d),
        1 => rng.contraction_with_unit_singular(d, 1),
        _ => {
            let mut t = rng.strict_contraction(d);
            t.column_mut(0).fill(c64(0.0, 0.0));
            t
        }
    };
    Ok(ContractionOp::new(t)?)
}

fn oracle_gap(pair: &PairFrame, qmax: i64) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for q in (-qmax..=qmax).filter(|&q| q != 0) {
        for k in 1..=3 {
            let a = gateaux_monomial(pair.path(), q, k)?;
            let b = taylor_oracle(pair.path(), q, k)?;
            worst = worst.max(max_abs(&(&a - &b)) / max_abs(&b).max(1.0));
        }
    }
    Ok(worst)
}

fn transfer_gaps(pair: &PairFrame) -> Result<(f64, f64), CliError> {
    let probe = TrigPoly::monomial(3, c64(1.0, 0.0));
    let dil = dilate_pair(pair, required_modes(&probe, 3))?;
    let mut gap: f64 = 0.0;
    let mut corner: f64 = 0.0;
    for q in [-2i64, 1, 3] {
        let phi = TrigPoly::monomial(q, c64(1.0, 0.0));
        for t in verify_trace_transfer_orders(pair, &dil, &phi, 3)? {
            gap = gap.max(t.gap);
        }
        corner = corner.max(corner_check(&dil, &phi, 3)?.corner_trace.norm());
    }
    Ok((gap, corner))
}

fn verify_instance(cfg: &ExperimentConfig, i: usize) -> Result<InstanceMetrics, CliError> {
    let mut rng = InstanceRng::instance(cfg.seed, i as u64);
    let d = cfg.dim.max(2);
    let t = test_contraction(&mut rng, d, i)?;
    let v = rng.unitary(d);
    let t0 = test_contraction(&mut rng, d, i + 1)?;
    let cu = build_cu_pair(&t, &v)?;
    let cc = build_cc_pair(&t0, &t)?;
    let qmax = cfg.qmax.min(6) as i64;
    let mut m = InstanceMetrics {
        oracle: oracle_gap(&cu, qmax)?.max(oracle_gap(&cc, qmax)?),
        cu_unitarity: cu.unitarity_residual(),
        cu_log: cu.log_residual(),
        cc_unitarity: cc.unitarity_residual(),
        cc_log: cc.log_residual(),
        powers: power_compression_gap(&t, 8)?,
        ..Default::default()
    };
    let (a, b) = cu.endpoint_gaps();
    m.cu_endpoints = a.max(b);
    let (a, b) = cc.endpoint_gaps();
    m.cc_endpoints = a.max(b);
    let (g1, c1) = transfer_gaps(&cu)?;
    let (g2, c2) = transfer_gaps(&cc)?;
    m.transfer = g1.max(g2);
    m.corner = c1.max(c2);
    let xi = ssf_fourier(&cc, cfg.n, cfg.qmax)?;
    m.formula = trace_formula_check(&cc, &rng.trig_poly(cfg.qmax), cfg.n, &xi)?;

    let a0 = DissipativeOp::new(rng.dissipative(d))?;
    let a1 = DissipativeOp::new(rng.dissipative(d))?;
    m.roundtrip = roundtrip_gap(&a0)?.max(roundtrip_gap(&a1)?);
    let r = defect_identities_check(&a0)?;
    m.defect = r.defect.max(r.defect_star);
    m.remainder = dissipative_remainder_check(&a0, &a1, cfg.n, 2)?.residual;

    let vop = ContractionOp::new(v.clone())?;
    m.zero = ssf_fourier(&build_cu_pair(&vop, &v)?, cfg.n, cfg.qmax)?.max_abs_coeff();
    Ok(m)
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    instances: usize,
    dim: usize,
    n: usize,
    qmax: usize,
    checks: Vec<Check>,
}

fn run_verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let metrics = per_index(cfg.instances, |i| verify_instance(cfg, i))?;
    let worst = |f: fn(&InstanceMetrics) -> f64| metrics.iter().map(f).fold(0.0, f64::max);
    let checks = vec![
        Check::new("gateaux_oracle", worst(|m| m.oracle), 1e-9),
        Check::new("cu_unitarity", worst(|m| m.cu_unitarity), 1e-10),
        Check::new("cu_log", worst(|m| m.cu_log), 1e-9),
        Check::new("cu_endpoints", worst(|m| m.cu_endpoints), 1e-8),
        Check::new("cc_unitarity", worst(|m| m.cc_unitarity), 1e-10),
        Check::new("cc_log", worst(|m| m.cc_log), 1e-9),
        Check::new("cc_endpoints", worst(|m| m.cc_endpoints), 1e-8),
        Check::new("dilation_powers", worst(|m| m.powers), 1e-12),
        Check::new("trace_transfer", worst(|m| m.transfer), 1e-8),
        Check::new("corner_trace", worst(|m| m.corner), 1e-10),
        Check::new("trace_formula", worst(|m| m.formula), 1e-8),
        Check::new("pkq_degree", pkq_degree_mismatches(8)? as f64, 0.0),
        Check::new("chain_rule", chain_rule_worst(4)?, 1e-7),
        Check::new("cayley_roundtrip", worst(|m| m.roundtrip), 1e-10),
        Check::new("defect_identities", worst(|m| m.defect), 1e-9),
        Check::new("dissipative_remainder", worst(|m| m.remainder), 1e-10),
        Check::new("zero_perturbation", worst(|m| m.zero), 1e-12),
    ];
    let report = VerifyReport {
        seed: cfg.seed,
        instances: cfg.instances,
        dim: cfg.dim.max(2),
        n: cfg.n,
        qmax: cfg.qmax,
        checks,
    };
    write_file(out, "verify_report.json", &to_json(&report))?;
    Ok(Outcome {
        stdout: check_table(&report.checks),
        pass: all_pass(&report.checks),
    })
}
