use thiserror::Error;

/// Errors raised by the state engine and the node models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("state has non-positive trace {trace:e}")]
    ZeroTrace { trace: f64 },
    #[error("observable {name} is not dichotomic (|O² − I| = {residual:e})")]
    NotDichotomic { name: String, residual: f64 },
    #[error("Kraus set violates completeness (residual {residual:e})")]
    InvalidChannel { residual: f64 },
    #[error("expectation has imaginary residue {residue:e}; input is not Hermitian")]
    ImaginaryResidue { residue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Errors raised by estimators and fits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no counts in setting {0}")]
    EmptySetting(String),
    #[error("zero singles in {0}")]
    ZeroSingles(&'static str),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("input is under-sampled: {0}")]
    UnderSampled(String),
    #[error("fit did not converge after {iterations} iterations (relative cost change {last_change:e}, cost {cost:e})")]
    NoConvergence { iterations: usize, last_change: f64, cost: f64 },
    #[error("inconsistent setting label {label}: {detail}")]
    InconsistentSetting { label: String, detail: String },
    #[error("{0} is not a decay model")]
    NotADecayModel(String),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = QuantumError> = std::result::Result<T, E>;
