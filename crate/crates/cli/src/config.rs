//! Experiment configuration file.
//!
//! Complex matrices are nested arrays of `[re, im]` pairs, row by row. Any
//! matrix left out is drawn from `seed` with [`ssf_core::random::InstanceRng`]
//! (ChaCha8, stream = instance index): strict contractions as
//! `G / (||G|| * 1.05)` for a complex Gaussian `G`, unitaries as the phase-fixed
//! QR factor of `G`, dissipative matrices as `H0 / sqrt(d) - i P^*P / d`.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::Deserialize;
use ssf_core::linalg::{c64, CMatrix};
use ssf_core::TrigPoly;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Verify,
    Ssf,
    Dilate,
    Cayley,
    Scaling,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::Ssf => "ssf",
            Mode::Dilate => "dilate",
            Mode::Cayley => "cayley",
            Mode::Scaling => "scaling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    #[default]
    Printed,
    Integrated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Samples of xi on `[0, 2 pi)`.
    pub points: usize,
    /// Half-width of the lambda grid.
    pub lambda_max: f64,
    /// Lambda grid step.
    pub lambda_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points: 256,
            lambda_max: 10.0,
            lambda_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub eps: Vec<f64>,
    pub q: i64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            eps: vec![1e-1, 1e-2, 1e-3],
            q: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub qmax: usize,
    /// Hardy-space truncation; defaults to the smallest accepted level.
    pub modes: Option<usize>,
    pub instances: usize,
    pub matrices: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
    /// Test function as `[[k, re, im], ...]`.
    pub phi: Option<TrigPoly>,
    pub grid: GridConfig,
    pub scaling: ScalingConfig,
    pub zeta_convention: ConventionName,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            seed: 0,
            dim: 3,
            n: 2,
            qmax: 6,
            modes: None,
            instances: 10,
            matrices: BTreeMap::new(),
            phi: None,
            grid: GridConfig::default(),
            scaling: ScalingConfig::default(),
            zeta_convention: ConventionName::Printed,
        }
    }
}

const MATRIX_NAMES: [&str; 6] = ["start", "end", "a0", "a1", "u0", "a"];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.dim < 1 {
            return bad("dim must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.qmax < 1 {
            return bad("qmax must be at least 1".into());
        }
        if self.instances < 1 {
            return bad("instances must be at least 1".into());
        }
        if self.grid.points < 1 {
            return bad("grid.points must be at least 1".into());
        }
        if !(self.grid.lambda_max > 0.0 && self.grid.lambda_step > 0.0 && self.grid.lambda_step < self.grid.lambda_max) {
            return bad("grid needs 0 < lambda_step < lambda_max".into());
        }
        if self.grid.lambda_max / self.grid.lambda_step > 1e7 {
            return bad("lambda grid exceeds 2e7 points".into());
        }
        for name in self.matrices.keys() {
            if !MATRIX_NAMES.contains(&name.as_str()) {
                return bad(format!("unknown matrix '{name}' (expected one of {MATRIX_NAMES:?})"));
            }
        }
        for name in MATRIX_NAMES {
            if self.matrices.contains_key(name) {
                self.matrix(name)?;
            }
        }
        Ok(())
    }

    /// The named matrix, if the config provides it.
    pub fn matrix(&self, name: &str) -> Result<Option<CMatrix>, CliError> {
        let Some(rows) = self.matrices.get(name) else {
            return Ok(None);
        };
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(CliError::Config(format!("matrix '{name}' is empty")));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CliError::Config(format!("matrix '{name}' has rows of different lengths")));
        }
        if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("matrix '{name}' has non-finite entries")));
        }
        Ok(Some(CMatrix::from_fn(rows.len(), cols, |i, j| c64(rows[i][j][0], rows[i][j][1]))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_matrices() {
        let cfg = ExperimentConfig::from_json(r#"{"matrices": {"start": [[[0.5, 0.0], [0.0, 1.0]], [[0.0, 0.0], [0.25, 0.0]]]}}"#)
            .unwrap();
        assert_eq!((cfg.dim, cfg.n, cfg.qmax), (3, 2, 6));
        let m = cfg.matrix("start").unwrap().unwrap();
        assert_eq!(m[(0, 1)], c64(0.0, 1.0));
        assert!(cfg.matrix("end").unwrap().is_none());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"n": 1}"#,
            r#"{"qmax": 0}"#,
            r#"{"bogus": 1}"#,
            r#"{"mode": "plot"}"#,
            r#"{"matrices": {"x": [[[1.0, 0.0]]]}}"#,
            r#"{"matrices": {"start": [[[1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]}}"#,
            r#"{"phi": [[1, 1.0, 0.0], [1, 0.0, 0.0]]}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}
