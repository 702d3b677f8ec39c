//! Numerical solution and hypothesis auditing for Urysohn quadratic integral
//! equations
//!
//! ```text
//! x(t) = a(t) + ∫₀ᵗ f₁(t,s,x(s)) ds · ∫₀ᵗ f₂(t,s,x(s)) ds,   t ∈ [0, T].
//! ```
//!
//! - [`problem`]: forcing terms, the kernel catalog, majorants, and
//!   manufactured-solution problems.
//! - [`quadrature`]: uniform grids and trapezoid prefix integration.
//! - [`operator`]: the discretized operator `F`, residuals, and the damped
//!   Picard solver.
//! - [`hypotheses`]: the invariant-ball radius `r = a_sup + M₁M₂` and lattice
//!   audits of domination, continuity and monotonicity.
//! - [`comparison`]: sub/supersolution certificates and the ordering check.
//! - [`extremal`]: ε-shifted kernel families converging to the maximal and
//!   minimal solutions, and the sandwich check.
//! - [`catalog`]: the built-in manufactured corpus and random problems.

// Negated comparisons are deliberate: a NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod comparison;
pub mod error;
pub mod extremal;
pub mod hypotheses;
pub mod operator;
pub mod problem;
pub mod quadrature;

pub use error::{Error, Result};
pub use extremal::{EpsilonFamily, EpsilonSchedule, Sign};
pub use hypotheses::{AuditReport, Bounds, Lattice};
pub use operator::{InitialGuess, SolveResult, SolveStatus, SolverConfig};
pub use problem::{Forcing, Kernel, Majorant, Problem, StateMap, Weight, Which};
pub use quadrature::{Grid, GridFunction};
