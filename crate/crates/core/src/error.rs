use thiserror::Error;

/// Errors surfaced by the library. `RouteDisagreement` is the most important
/// one: it means two independent computations of the same quantity disagreed,
/// i.e. a theorem-under-test failed on an instance.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degree must be at least 3, got {0}")]
    DegreeTooSmall(u8),
    #[error("color {0} out of range for degree {1}")]
    ColorOutOfRange(u8, u8),
    #[error("word is not non-backtracking at position {0}")]
    Backtracking(usize),
    #[error("end has empty period")]
    EmptyPeriod,
    #[error("invalid permutation image array: {0}")]
    InvalidPerm(String),
    #[error("group enumeration exceeded bound of {0} elements")]
    EnumerationBound(usize),
    #[error("malformed sigma map: missing vertex {0} within depth {1}")]
    MissingSigma(String, usize),
    #[error("element is not legal for the scheme: {0}")]
    IllegalElement(String),
    #[error("horizon {horizon} too small: {need}")]
    HorizonTooSmall { horizon: usize, need: String },
    #[error("search budget exceeded ({0} nodes)")]
    BudgetExceeded(u64),
    #[error("period not detected within horizon {0}")]
    PeriodNotDetected(usize),
    #[error("no certified minimizing subgroup within horizon {0}")]
    NoCertifiedSubgroup(usize),
    #[error("undetermined at horizon {0}: {1}")]
    Undetermined(usize, String),
    #[error("route disagreement (invariant violation): {0}")]
    RouteDisagreement(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
