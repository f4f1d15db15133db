use thiserror::Error;

/// Errors raised by the simulation, estimation and optimization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cutoff {cutoff} too small: truncated tail {tail:.3e} exceeds {limit:.0e}")]
    CutoffTooSmall { cutoff: usize, tail: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("index {index} out of range for {len} factors")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("state not normalized: squared norm {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("probability table not normalized: total {total}")]
    ProbabilityNotNormalized { total: f64 },

    #[error("grid too small: normalization deficit {deficit:.3e}")]
    GridTooSmall { deficit: f64 },

    #[error("no crossing of the target value in the scanned range")]
    NoCrossing,

    #[error("degenerate fit data: {0}")]
    DegenerateFit(String),

    #[error("objective returned a non-finite value after {evaluations} evaluations")]
    NonFiniteObjective { evaluations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
