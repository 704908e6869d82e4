use thiserror::Error;

/// Errors produced by the solver and its supporting primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability vector needs at least 2 entries, got {0}")]
    TooShort(usize),

    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entry {index} is not finite ({value})")]
    NonFiniteEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, outside tolerance {tol} of 1")]
    SumOutOfTolerance { sum: f64, tol: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("class index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("infinite importance coefficient needs a unique {0} class")]
    AmbiguousExtremum(Extremum),

    #[error("weight is not finite for u = {u}, coefficient = {w}")]
    NonFiniteResult { u: f64, w: f64 },

    #[error("revenue parameter `{name}` is not finite ({value})")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("neutral system: revenue does not depend on the recommendation distribution")]
    NeutralSystem,

    #[error("target {target} outside the open range ({min}, {max})")]
    TargetOutOfRange { target: f64, min: f64, max: f64 },

    #[error("root search did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("operation needs a feasible result with a finite coefficient")]
    NotApplicable,

    #[error("dimension {n} exceeds the oracle limit {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("grid resolution {0} is below the minimum of 10")]
    ResolutionTooCoarse(u32),

    #[error("feasibility mismatch: optimizer says {optimizer}, oracle says {oracle}")]
    FeasibilityMismatch { optimizer: bool, oracle: bool },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which extremum an infinite tilt concentrates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

impl std::fmt::Display for Extremum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extremum::Min => f.write_str("minimum"),
            Extremum::Max => f.write_str("maximum"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
