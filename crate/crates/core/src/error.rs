use thiserror::Error;

use crate::operator::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{context} evaluated to {value}")]
    Evaluation { context: String, value: f64 },

    #[error("forcing is negative at t = {t} (a = {value})")]
    NonPositiveForcing { t: f64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expected {expected} but margin {margin:e} at node {node} (t = {t}) violates it")]
    RoleViolated {
        expected: &'static str,
        node: usize,
        t: f64,
        margin: f64,
    },

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error("family member {index} (eps = {eps}) ended with status {status:?}")]
    FamilySolveFailed {
        index: usize,
        eps: f64,
        status: SolveStatus,
    },
}
