use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quantile values decrease at piece {index}")]
    NonMonotone { index: usize },
    #[error("piece masses sum to {total}, expected 1")]
    BadMass { total: f64 },
    #[error("level {0} outside (0,1]")]
    OutOfRange(f64),
    #[error("kernel is not doubly stochastic (second marginal off by {deviation})")]
    NotDoublyStochastic { deviation: f64 },
    #[error("marginals differ by {deviation}")]
    MarginalMismatch { deviation: f64 },
    #[error("expected {expected} thresholds, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("kernel needs {needed} distinct target measures, capacity is {cap}")]
    Capacity { needed: usize, cap: usize },
    #[error("no convergence after {depth} doublings, last rho gap {last_gap}")]
    NoConvergence { depth: u32, last_gap: f64 },
    #[error("breakpoint {0} is not aligned with the bin grid")]
    GridMisaligned(f64),
    #[error("state has mass {0}, too small to condition on")]
    ZeroMass(f64),
    #[error("family has no marginal at time {0}")]
    UndefinedTime(f64),
    #[error("family is not declared atomically complete")]
    IncompleteFamily,
    #[error("invalid input: {0}")]
    Invalid(String),
}
