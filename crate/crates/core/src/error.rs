use thiserror::Error;

/// Errors raised by the estimation, inference and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis index {index} out of range for truncation level {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point {point:?} lies outside the unit cube [0,1]^{dim}")]
    OutOfDomain { point: Vec<f64>, dim: usize },

    #[error("point has dimension {got}, spectrum expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{family} does not supply {what}")]
    Unsupported { family: String, what: &'static str },

    #[error("spectral sums not converged: tail bound {tail:.3e} exceeds {tol:.1e} of h_inv at M = {len}")]
    TruncationNotConverged { len: usize, tail: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("machine {machine_id}: {source}")]
    Machine {
        machine_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rate side condition violated: {0}")]
    SideCondition(String),

    #[error("{failed} of {total} replications failed (limit 10%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
