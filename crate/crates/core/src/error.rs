//! Crate-wide error type.

use num_complex::Complex64;

/// Errors surfaced by parsing, jet arithmetic, and the geometry pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("division by zero in jet arithmetic")]
    DivisionByZero,

    #[error("branch cut violation: {func} evaluated at {value} (cut along the non-positive real axis)")]
    BranchCut { func: &'static str, value: Complex64 },

    #[error("jet order {have} is insufficient (need {need})")]
    InsufficientOrder { need: usize, have: usize },

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid chart point: {0}")]
    InvalidPoint(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error in subtree at bytes {start}..{end}: {source}")]
    Eval {
        start: usize,
        end: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("expression must be holomorphic but contains conj (at byte {offset})")]
    NonHolomorphic { offset: usize },

    #[error("point {point} outside model domain")]
    OutsideDomain { point: String },

    #[error("singular coframe at {point}: {detail}")]
    SingularCoframe { point: String, detail: String },

    #[error("coframe does not define an integrable structure at {point}: |(d phi)^(0,2)| = {magnitude:.3e}")]
    NonIntegrable { point: String, magnitude: f64 },

    #[error("metric not positive definite at {point}: min eigenvalue {min_eig:.3e}")]
    NotPositiveDefinite { point: String, min_eig: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("check {check} not applicable: {reason}")]
    InapplicableCheck { check: String, reason: String },

    #[error("domain sampling failed: {accepted} of {attempted} candidate points accepted")]
    SamplingFailed { accepted: usize, attempted: usize },

    #[error("series truncation bound {bound:.3e} exceeds tolerance {tol:.3e} at the queried point")]
    TruncationBound { bound: f64, tol: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid Lie algebra data: {0}")]
    InvalidAlgebra(String),

    #[error("invalid complex structure: {0}")]
    InvalidStructure(String),

    #[error("spec file error at line {line}: {message}")]
    SpecFile { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
