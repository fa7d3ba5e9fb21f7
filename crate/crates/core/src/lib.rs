//! Finite-dimensional laboratory for higher-order spectral shift functions of
//! contraction pairs connected by multiplicative paths.

pub mod cayley;
pub mod dilation;
pub mod error;
pub mod funcspace;
pub mod linalg;
pub mod pairs;
pub mod paths;
pub mod random;
pub mod ssf;

pub use error::{Result, SsfError};
pub use funcspace::TrigPoly;
pub use linalg::{CMatrix, ContractionOp, HermitianGenerator, C64};
pub use paths::{DerivativeMethod, MultiplicativePath, TaylorMatrixSeries};
