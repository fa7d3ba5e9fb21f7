//! Seeded random instances.
//!
//! The generator is ChaCha8 keyed through `rand`'s `seed_from_u64`, with
//! independent instances drawn from separate ChaCha streams. Uniforms take the
//! top 53 bits of `next_u64`; normals use the cosine branch of Box-Muller, so
//! every normal consumes exactly two uniforms. Matrices are filled row by row,
//! real part before imaginary part.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::funcspace::TrigPoly;
use crate::linalg::{complex_diag, hermitize, op_norm, real_diag, zeros, CMatrix, C64};

/// Relative margin used to make random contractions strict.
pub const CONTRACTION_MARGIN: f64 = 0.05;

pub struct InstanceRng {
    rng: ChaCha8Rng,
}

impl InstanceRng {
    pub fn new(seed: u64) -> Self {
        InstanceRng {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Instance `index` of a run seeded with `seed`.
    pub fn instance(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        InstanceRng { rng }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `lo..=hi`.
    pub fn int_in(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as f64;
        (lo + (self.uniform() * span) as usize).min(hi)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Standard complex normal, `E|z|^2 = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        let re = self.gaussian();
        let im = self.gaussian();
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        let mut m = zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.complex_gaussian();
            }
        }
        m
    }

    /// Haar unitary: QR of a Gaussian matrix with the phases of `diag R`
    /// moved into `Q`.
    pub fn unitary(&mut self, d: usize) -> CMatrix {
        let g = self.gaussian_matrix(d, d);
        let qr = g.qr();
        let q = qr.q();
        let r = qr.r();
        let phases: Vec<C64> = (0..d)
            .map(|j| {
                let x = r[(j, j)];
                if x.norm() == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    x / x.norm()
                }
            })
            .collect();
        q * complex_diag(&phases)
    }

    /// `G / (||G|| (1 + delta))` with `delta = CONTRACTION_MARGIN`.
    pub fn strict_contraction(&mut self, d: usize) -> CMatrix {
        let g = self.gaussian_matrix(d, d);
        let norm = op_norm(&g);
        g.unscale(norm * (1.0 + CONTRACTION_MARGIN))
    }

    /// `U diag(sigma) W^*` where the first `units` singular values are exactly
    /// one and the rest are uniform in `[0, 0.95)`; the defect is rank deficient
    /// whenever `units > 0`.
    pub fn contraction_with_unit_singular(&mut self, d: usize, units: usize) -> CMatrix {
        let u = self.unitary(d);
        let w = self.unitary(d);
        let sigma: Vec<f64> = (0..d)
            .map(|j| if j < units { 1.0 } else { 0.95 * self.uniform() })
            .collect();
        u * real_diag(&sigma) * w.adjoint()
    }

    /// `(G + G^*) / 2`.
    pub fn hermitian(&mut self, d: usize) -> CMatrix {
        hermitize(&self.gaussian_matrix(d, d))
    }

    /// Hermitian matrix rescaled to operator norm `norm`.
    pub fn hermitian_with_norm(&mut self, d: usize, norm: f64) -> CMatrix {
        let h = self.hermitian(d);
        let n = op_norm(&h);
        h.scale(norm / n)
    }

    /// `H0 - i P^*P` with `H0` Hermitian Gaussian and `P` Gaussian, both
    /// scaled by `1 / sqrt(d)` and `1 / d` respectively.
    pub fn dissipative(&mut self, d: usize) -> CMatrix {
        let h0 = self.hermitian(d).unscale((d as f64).sqrt());
        let p = self.gaussian_matrix(d, d);
        let pp = (p.adjoint() * p).unscale(d as f64);
        h0 - hermitize(&pp) * C64::new(0.0, 1.0)
    }

    /// Coefficients on `-degree..=degree` with variance decaying like `1/(1+k^2)`.
    pub fn trig_poly(&mut self, degree: usize) -> TrigPoly {
        let deg = degree as i64;
        TrigPoly::from_coeffs(
            (-deg..=deg)
                .map(|k| (k, self.complex_gaussian() / (1.0 + (k * k) as f64)))
                .collect::<Vec<_>>(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, unitarity_residual};

    #[test]
    fn reproducible() {
        let a = InstanceRng::new(7).gaussian_matrix(3, 3);
        let b = InstanceRng::new(7).gaussian_matrix(3, 3);
        assert_eq!(a, b);
        let c = InstanceRng::instance(7, 1).gaussian_matrix(3, 3);
        assert!(fro_norm(&(a - c)) > 0.0);
    }

    #[test]
    fn instance_kinds() {
        let mut rng = InstanceRng::new(1);
        assert!(unitarity_residual(&rng.unitary(5)) < 1e-13);
        let t = rng.strict_contraction(4);
        assert!((op_norm(&t) - 1.0 / 1.05).abs() < 1e-12);
        let t = rng.contraction_with_unit_singular(4, 2);
        assert!((op_norm(&t) - 1.0).abs() < 1e-13);
        let a = rng.dissipative(3);
        let im = (&a - a.adjoint()) * C64::new(0.0, -0.5);
        let eig = crate::linalg::herm_eig(&im).unwrap();
        assert!(eig.values.iter().all(|&v| v <= 1e-12));
    }
}
