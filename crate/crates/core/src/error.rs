use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("form degree {degree} does not fit in dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },

    #[error("forms live in different bases")]
    BasisMismatch,

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("invalid complex structure: {0}")]
    InvalidComplexStructure(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("algebra is not 2-step nilpotent (residual {0:.3e})")]
    NotTwoStep(f64),

    #[error("form is not of pure bidegree")]
    NotPure,

    #[error("integrability leakage {0:.3e} above threshold")]
    IntegrabilityLeakage(f64),

    #[error("structure is not SKT (residual {0:.3e})")]
    NotSkt(f64),

    #[error("bracket leaves the variety: {0}")]
    OutsideVariety(String),

    #[error("unknown catalog instance `{0}`")]
    UnknownInstance(String),

    #[error("ill-conditioned transporter (|det h| = {0:.3e})")]
    Conditioning(f64),

    #[error("invariant drift at t = {t}: {what} = {value:.3e}")]
    InvariantDrift { t: f64, what: String, value: f64 },

    #[error("sampling grids do not match: {0}")]
    SamplingMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
