#![allow(dead_code)]

use ssf_core::linalg::{leading_isometry, max_abs, CMatrix};
use ssf_core::random::InstanceRng;
use ssf_core::{HermitianGenerator, MultiplicativePath};

/// `s -> e^{isA} U0` on the whole space, `||A|| = norm`.
pub fn full_path(rng: &mut InstanceRng, d: usize, norm: f64) -> MultiplicativePath {
    let u0 = rng.unitary(d);
    let a = HermitianGenerator::new(rng.hermitian_with_norm(d, norm)).unwrap();
    MultiplicativePath::full_space(a, u0).unwrap()
}

/// Compression of `e^{isG}B` from `d + extra` dimensions to the first `d`.
pub fn compressed_path(rng: &mut InstanceRng, d: usize, extra: usize, norm: f64) -> MultiplicativePath {
    let big = d + extra;
    let g = HermitianGenerator::new(rng.hermitian_with_norm(big, norm)).unwrap();
    let base = &rng.unitary(big) * leading_isometry(big, d) * rng.strict_contraction(d);
    MultiplicativePath::new(g, base, leading_isometry(big, d)).unwrap()
}

pub fn rel_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}
