use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fock dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("round count {0} is outside the supported range")]
    RoundsOutOfRange(usize),

    #[error("expected {expected} strengths, got {got}")]
    StrengthCount { expected: usize, got: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("state is not normalised (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("unphysical expectation value |<D>| = {0}")]
    Unphysical(f64),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("analytic model outside its domain: {0}")]
    ModelDomain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("optimizer exhausted its budget after {evaluations} evaluations (best value {best_value})")]
    NoConvergence {
        evaluations: usize,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("postselection success probability {0} is below the floor")]
    DegeneratePostselection(f64),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
