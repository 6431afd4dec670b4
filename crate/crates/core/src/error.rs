use thiserror::Error;

/// Errors surfaced by the simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ambient dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} cap exceeded: requested {requested}, limit {limit}")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invalid ambient dimension {0}: must be in 1..=64")]
    BadAmbientDim(usize),

    #[error("subspace dimension {d} exceeds ambient dimension {n}")]
    BadSubspaceDim { d: usize, n: usize },

    #[error("state is not normalized: squared norm {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("operator is not Hermitian (max asymmetry {max_dev})")]
    NotHermitian { max_dev: f64 },

    #[error("operator spectrum outside [0, 1]: eigenvalue bound {value}")]
    NotContraction { value: f64 },

    #[error("ensemble weights invalid: {0}")]
    BadEnsemble(String),

    #[error("eigensolver did not converge within {iters} iterations")]
    NonConvergence { iters: usize },

    #[error("{op}: precondition failed: {reason}")]
    Precondition { op: &'static str, reason: String },

    #[error("verifier called with zero trials")]
    ZeroTrials,

    #[error("prover invoked on a no-instance")]
    ProveOnNoInstance,

    #[error("np relation rejected the witness")]
    InvalidWitness,

    #[error("malformed transcript: {0}")]
    BadTranscript(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
