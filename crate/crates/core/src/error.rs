use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, SaemError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SaemError {
    #[error("non-finite value from {what}")]
    NonFiniteEvaluation { what: &'static str },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("complete-data information is not symmetric (max |A - A^T| = {asymmetry:e})")]
    AsymmetricInformation { asymmetry: f64 },

    #[error("parameter vector invalid: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid gain schedule: {0}")]
    InvalidGain(String),

    #[error("Gamma is singular at iteration {iter} even after ridge escalation (min eigenvalue {min_eigenvalue:e})")]
    SingularGamma { iter: u64, min_eigenvalue: f64 },

    #[error("parameter diverged at iteration {iter} (norm {norm:e})")]
    DivergedParameter { iter: u64, norm: f64 },

    #[error("could not backtrack the step into the parameter bounds at iteration {iter}")]
    StepOutOfBounds { iter: u64 },

    #[error("model does not provide exact conditional expectations")]
    ExactExpectationsUnavailable,

    #[error("observed information is not positive definite")]
    IndefiniteInformation,

    #[error("averaging window is empty")]
    EmptyWindow,

    #[error("line search failed (gradient norm {grad_norm:e})")]
    LineSearchFailure { best: Vec<f64>, grad_norm: f64 },
}
