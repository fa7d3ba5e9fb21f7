use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsfError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("operator norm {norm} exceeds 1 + 1e-12")]
    NotContraction { norm: f64 },
    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("path does not reach the end operator (gap {gap:e})")]
    Connection { gap: f64 },
    #[error("truncation N = {modes} is below the required {required}")]
    InsufficientTruncation { modes: usize, required: usize },
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("ill-conditioned: {0}")]
    Conditioning(String),
    #[error("-1 lies in the spectrum (smallest singular value of T + I is {sigma:e})")]
    MinusOneInSpectrum { sigma: f64 },
}

impl SsfError {
    /// Short stable identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            SsfError::Validation(_) => "validation",
            SsfError::NotContraction { .. } => "not_a_contraction",
            SsfError::NotUnitary { .. } => "not_unitary",
            SsfError::Connection { .. } => "connection",
            SsfError::InsufficientTruncation { .. } => "insufficient_truncation",
            SsfError::IllConditionedFit(_) => "ill_conditioned_fit",
            SsfError::Conditioning(_) => "conditioning",
            SsfError::MinusOneInSpectrum { .. } => "minus_one_in_spectrum",
        }
    }
}

pub type Result<T> = std::result::Result<T, SsfError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SsfError::Validation(msg.into()))
}
