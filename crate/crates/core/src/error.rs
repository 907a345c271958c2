use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid hypothesis set: {0}")]
    InvalidHypotheses(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),
    #[error("subset must be non-empty")]
    EmptySubset,
    #[error("index {index} is out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: String,
        index: usize,
        size: usize,
    },
    #[error("{m} hypotheses exceed the closure cap of {cap}")]
    ClosureTooLarge { m: usize, cap: usize },
    #[error("cannot remove the last remaining hypothesis")]
    LastHypothesis,
    #[error("{what} must lie in {range}, got {value}")]
    OutOfRange {
        what: String,
        range: &'static str,
        value: f64,
    },
    #[error("invalid spending function: {0}")]
    InvalidSpending(String),
    #[error("information fractions must be strictly increasing and end at 1: {0}")]
    InvalidFractions(String),
    #[error("invalid event table: {0}")]
    InvalidEvents(String),
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error(
        "correlation matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("integration dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("missing statistic for hypothesis {hypothesis} at analysis {analysis}")]
    MissingStatistic { hypothesis: usize, analysis: usize },
    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),
    #[error("root finder did not converge for {what} after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("target crossing probability {target} unreachable: {detail}")]
    Infeasible { target: f64, detail: String },
    #[error("integration error bound {error_bound:e} exceeds the allowed {allowed:e}")]
    IntegrationTolerance { error_bound: f64, allowed: f64 },
    #[error("rejection indicator is not monotone in the significance level: {0}")]
    NonMonotone(String),
}

impl Error {
    /// Numerical failures, as opposed to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Infeasible { .. }
                | Error::IntegrationTolerance { .. }
                | Error::NonMonotone(_)
        )
    }
}

pub(crate) fn check_probability(what: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: what.to_string(),
            range: "[0, 1]",
            value,
        })
    }
}

pub(crate) fn check_open_probability(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: what.to_string(),
            range: "(0, 1)",
            value,
        })
    }
}
