//! Sub/supersolution certification and the ordering conclusion for
//! nondecreasing-in-x kernels: a subsolution stays strictly below a
//! supersolution for `t > 0` when one of the two inequalities is strict.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::random_monotone_problem;
use crate::error::{Error, Result};
use crate::extremal::{perturb_problem, Sign};
use crate::hypotheses::{audit_monotonicity, Lattice, MonotonicityReport};
use crate::operator::{picard_solve, DiscreteOperator, SolverConfig};
use crate::problem::Problem;
use crate::quadrature::{Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Subsolution,
    Supersolution,
}

impl Role {
    fn label(self) -> &'static str {
        match self {
            Role::Subsolution => "subsolution",
            Role::Supersolution => "supersolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Allowed violation of the non-strict inequality.
    pub slack_tol: f64,
    /// Margin required at every `t_i > 0` for a strict certificate.
    pub strict_margin: f64,
}

impl Tolerances {
    /// `10·tol` and `100·tol`.
    pub fn from_solver_tol(tol: f64) -> Self {
        Tolerances {
            slack_tol: 10.0 * tol,
            strict_margin: 100.0 * tol,
        }
    }
}

/// A certified role for a grid function `g`; `margin = g − Fg`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRole {
    pub role: Role,
    pub strict: bool,
    pub values: GridFunction,
    pub margin: GridFunction,
    #[serde(skip)]
    problem_id: u64,
}

/// Signed excess of `margin` over what `role` allows, per node.
fn excess(role: Role, margin: f64, tol: &Tolerances) -> f64 {
    match role {
        Role::Subsolution => margin - tol.slack_tol,
        Role::Supersolution => -margin - tol.slack_tol,
    }
}

fn is_strict(role: Role, margin: &GridFunction, tol: &Tolerances) -> bool {
    margin.values().iter().skip(1).all(|&m| match role {
        Role::Subsolution => m <= -tol.strict_margin,
        Role::Supersolution => m >= tol.strict_margin,
    })
}

pub fn certify_role(p: &Problem, g: &GridFunction, expected: Role, tol: &Tolerances) -> Result<SolutionRole> {
    let op = DiscreteOperator::new(p, g.grid())?;
    certify_with(&op, g, expected, tol)
}

/// Computes `g − Fg` and certifies `expected` when it holds within
/// `slack_tol` at every node.
pub fn certify_with(
    op: &DiscreteOperator<'_>,
    g: &GridFunction,
    expected: Role,
    tol: &Tolerances,
) -> Result<SolutionRole> {
    if g.values().iter().any(|v| *v <= 0.0) {
        log::warn!("certifying a function that is not strictly positive");
    }
    let margin = op.margin(g)?;
    let (worst, worst_excess) = margin
        .values()
        .iter()
        .map(|&m| excess(expected, m, tol))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    if worst_excess > 0.0 {
        return Err(Error::RoleViolated {
            expected: expected.label(),
            node: worst,
            t: g.grid().node(worst),
            margin: margin.values()[worst],
        });
    }
    Ok(SolutionRole {
        role: expected,
        strict: is_strict(expected, &margin, tol),
        values: g.clone(),
        margin,
        problem_id: op.problem().fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingVerdict {
    pub holds: bool,
    /// First node with `t > 0` where the subsolution is not below.
    pub first_crossing: Option<usize>,
    pub crossing_time: Option<f64>,
    /// `min_{t_i > 0} (y_i − x_i)`.
    pub min_gap: f64,
}

/// Checks `x(t_i) < y(t_i)` for every `t_i > 0`.
pub fn check_ordering(
    sub: &SolutionRole,
    sup: &SolutionRole,
    monotonicity: &MonotonicityReport,
) -> Result<OrderingVerdict> {
    if sub.role != Role::Subsolution || sup.role != Role::Supersolution {
        return Err(Error::PreconditionUnmet(
            "expected a subsolution and a supersolution".into(),
        ));
    }
    if sub.problem_id != sup.problem_id {
        return Err(Error::PreconditionUnmet(
            "roles were certified against different problems".into(),
        ));
    }
    if !monotonicity.nondecreasing_in_x_ok {
        return Err(Error::PreconditionUnmet(
            "kernels failed the nondecreasing-in-x audit".into(),
        ));
    }
    if !(sub.strict || sup.strict) {
        return Err(Error::PreconditionUnmet("neither role is strict".into()));
    }
    sub.values.check_same_grid(&sup.values)?;
    let grid = sub.values.grid();
    let mut first_crossing = None;
    let mut min_gap = f64::INFINITY;
    for (i, (x, y)) in sub.values.values().iter().zip(sup.values.values()).enumerate().skip(1) {
        let gap = y - x;
        min_gap = min_gap.min(gap);
        if !(gap > 0.0) && first_crossing.is_none() {
            first_crossing = Some(i);
        }
    }
    Ok(OrderingVerdict {
        holds: first_crossing.is_none(),
        first_crossing,
        crossing_time: first_crossing.map(|i| grid.node(i)),
        min_gap,
    })
}

/// Settings for the randomized comparison harness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessConfig {
    pub seed: u64,
    pub problems: usize,
    pub grid_n: usize,
    /// Subsolution candidate is `(1 − shrink) · x`.
    pub shrink: f64,
    /// Supersolution candidate solves the `+eps` perturbed problem.
    pub eps: f64,
    pub solver: SolverConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 0,
            problems: 200,
            grid_n: 64,
            shrink: 0.05,
            eps: 0.1,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub problem: usize,
    pub node: usize,
    pub t: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessReport {
    pub seed: u64,
    pub problems: usize,
    pub monotone_problems: usize,
    pub solved: usize,
    pub certified_pairs: usize,
    pub orderings_verified: usize,
    /// Problems where a candidate failed certification.
    pub uncertified: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

enum Outcome {
    NotMonotone,
    Unsolved,
    Uncertified,
    Verified,
    Counterexample(Counterexample),
}

fn run_case(index: usize, p: &Problem, cfg: &HarnessConfig) -> Result<Outcome> {
    let grid = Grid::new(p.horizon(), cfg.grid_n)?;
    let bounds = crate::hypotheses::compute_bounds(p, &grid)?;
    let monotone = audit_monotonicity(p, &Lattice::for_bounds(&bounds));
    if !monotone.nondecreasing_in_x_ok {
        return Ok(Outcome::NotMonotone);
    }
    let solved = picard_solve(p, grid, &cfg.solver)?;
    let shifted = perturb_problem(p, cfg.eps, Sign::Plus)?;
    let upper = picard_solve(&shifted.problem, grid, &cfg.solver)?;
    if !(solved.converged() && upper.converged()) {
        return Ok(Outcome::Unsolved);
    }
    let tol = Tolerances::from_solver_tol(cfg.solver.tol);
    let op = DiscreteOperator::new(p, grid)?;
    let shrunk: Vec<f64> = solved.x.values().iter().map(|v| (1.0 - cfg.shrink) * v).collect();
    let sub = certify_with(&op, &GridFunction::new(grid, shrunk)?, Role::Subsolution, &tol);
    let sup = certify_with(&op, &upper.x, Role::Supersolution, &tol);
    let (sub, sup) = match (sub, sup) {
        (Ok(a), Ok(b)) if a.strict => (a, b),
        _ => return Ok(Outcome::Uncertified),
    };
    let verdict = check_ordering(&sub, &sup, &monotone)?;
    Ok(match verdict.first_crossing {
        None => Outcome::Verified,
        Some(node) => Outcome::Counterexample(Counterexample {
            problem: index,
            node,
            t: grid.node(node),
            gap: verdict.min_gap,
        }),
    })
}

/// Falsification harness over seeded random catalog problems: every
/// certified (strict subsolution, supersolution) pair must be ordered.
pub fn comparison_harness(cfg: &HarnessConfig) -> Result<HarnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let problems: Vec<Problem> = (0..cfg.problems)
        .map(|_| random_monotone_problem(&mut rng))
        .collect::<Result<_>>()?;
    let outcomes = problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_case(i, p, cfg))
        .collect::<Result<Vec<Outcome>>>()?;

    let mut report = HarnessReport {
        seed: cfg.seed,
        problems: cfg.problems,
        monotone_problems: 0,
        solved: 0,
        certified_pairs: 0,
        orderings_verified: 0,
        uncertified: 0,
        counterexamples: Vec::new(),
    };
    for o in outcomes {
        if !matches!(o, Outcome::NotMonotone) {
            report.monotone_problems += 1;
        }
        if matches!(o, Outcome::Uncertified | Outcome::Verified | Outcome::Counterexample(_)) {
            report.solved += 1;
        }
        match o {
            Outcome::NotMonotone | Outcome::Unsolved => {}
            Outcome::Uncertified => report.uncertified += 1,
            Outcome::Verified => {
                report.certified_pairs += 1;
                report.orderings_verified += 1;
            }
            Outcome::Counterexample(c) => {
                report.certified_pairs += 1;
                report.counterexamples.push(c);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Forcing, Kernel};

    fn zero_problem() -> Problem {
        Problem::new(1.0, Forcing::constant(1.0), Kernel::Zero, Kernel::Zero).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::from_solver_tol(1e-10)
    }

    fn grid() -> Grid {
        Grid::new(1.0, 10).unwrap()
    }

    fn monotone() -> MonotonicityReport {
        audit_monotonicity(&zero_problem(), &Lattice::new(1.0))
    }

    #[test]
    fn half_is_a_strict_subsolution() {
        let g = GridFunction::constant(grid(), 0.5).unwrap();
        let role = certify_role(&zero_problem(), &g, Role::Subsolution, &tol()).unwrap();
        assert!(role.strict);
        assert!(role.margin.values().iter().all(|m| *m == -0.5));
    }

    #[test]
    fn forcing_is_a_non_strict_supersolution() {
        let g = GridFunction::constant(grid(), 1.0).unwrap();
        let role = certify_role(&zero_problem(), &g, Role::Supersolution, &tol()).unwrap();
        assert!(!role.strict);
        assert!(role.margin.values().iter().all(|m| *m == 0.0));
    }

    #[test]
    fn wrong_role_is_reported_with_worst_node() {
        let g = GridFunction::from_fn(grid(), |t| 0.5 + t).unwrap();
        let err = certify_role(&zero_problem(), &g, Role::Supersolution, &tol()).unwrap_err();
        match err {
            Error::RoleViolated { node, margin, .. } => {
                assert_eq!(node, 0);
                assert_eq!(margin, -0.5);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn fixed_point_certifies_both_ways() {
        let p = zero_problem();
        let r = picard_solve(&p, grid(), &SolverConfig::default()).unwrap();
        for role in [Role::Subsolution, Role::Supersolution] {
            let c = certify_role(&p, &r.x, role, &tol()).unwrap();
            assert!(c.margin.sup_norm() <= 1e-10);
        }
    }

    #[test]
    fn ordering_examples() {
        let p = zero_problem();
        let sub = certify_role(&p, &GridFunction::constant(grid(), 0.5).unwrap(), Role::Subsolution, &tol()).unwrap();
        let sup = certify_role(&p, &GridFunction::constant(grid(), 1.0).unwrap(), Role::Supersolution, &tol()).unwrap();
        let v = check_ordering(&sub, &sup, &monotone()).unwrap();
        assert!(v.holds);
        assert_eq!(v.min_gap, 0.5);
    }

    #[test]
    fn ordering_needs_a_strict_role() {
        let p = zero_problem();
        let x = picard_solve(&p, grid(), &SolverConfig::default()).unwrap().x;
        let sub = certify_role(&p, &x, Role::Subsolution, &tol()).unwrap();
        let sup = certify_role(&p, &x, Role::Supersolution, &tol()).unwrap();
        assert!(matches!(
            check_ordering(&sub, &sup, &monotone()),
            Err(Error::PreconditionUnmet(_))
        ));
    }

    #[test]
    fn ordering_needs_monotone_kernels() {
        let p = zero_problem();
        let sub = certify_role(&p, &GridFunction::constant(grid(), 0.5).unwrap(), Role::Subsolution, &tol()).unwrap();
        let sup = certify_role(&p, &GridFunction::constant(grid(), 1.0).unwrap(), Role::Supersolution, &tol()).unwrap();
        let bad = MonotonicityReport {
            nondecreasing_in_x_ok: false,
            ..monotone()
        };
        assert!(check_ordering(&sub, &sup, &bad).is_err());
    }

    #[test]
    fn ordering_needs_the_same_problem() {
        let other = Problem::new(1.0, Forcing::constant(2.0), Kernel::Zero, Kernel::Zero).unwrap();
        let sub = certify_role(&zero_problem(), &GridFunction::constant(grid(), 0.5).unwrap(), Role::Subsolution, &tol())
            .unwrap();
        let sup =
            certify_role(&other, &GridFunction::constant(grid(), 2.0).unwrap(), Role::Supersolution, &tol()).unwrap();
        assert!(check_ordering(&sub, &sup, &monotone()).is_err());
    }

    #[test]
    fn shrunk_solution_below_perturbed_solution() {
        let cfg = HarnessConfig {
            problems: 12,
            seed: 3,
            ..Default::default()
        };
        let report = comparison_harness(&cfg).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.certified_pairs > 0);
    }
}
