//! The discretized operator `F`, residuals, and the damped Picard solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypotheses::{bounds_from_forcing, Bounds, BoundsOptions};
use crate::problem::{eval_forcing, Problem, Which};
use crate::quadrature::{check_horizon, kernel_row, Grid, GridFunction};

/// `F` on a fixed grid, with the forcing sampled once.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<'p> {
    problem: &'p Problem,
    grid: Grid,
    forcing: Vec<f64>,
}

impl<'p> DiscreteOperator<'p> {
    pub fn new(problem: &'p Problem, grid: Grid) -> Result<Self> {
        check_horizon(problem, &grid)?;
        let forcing = (0..grid.len())
            .into_par_iter()
            .map(|i| eval_forcing(problem, grid.node(i)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(DiscreteOperator {
            problem,
            grid,
            forcing,
        })
    }

    pub fn problem(&self) -> &'p Problem {
        self.problem
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `a(t_i)` at every node.
    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    pub fn forcing_function(&self) -> GridFunction {
        GridFunction::new(self.grid, self.forcing.clone()).expect("forcing validated finite")
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds_with(&BoundsOptions::default())
    }

    pub fn bounds_with(&self, opts: &BoundsOptions) -> Bounds {
        bounds_from_forcing(self.problem, &self.grid, &self.forcing, opts)
    }

    fn check(&self, x: &GridFunction) -> Result<()> {
        if x.grid() != self.grid {
            return Err(Error::GridMismatch(format!("{:?} vs operator grid {:?}", x.grid(), self.grid)));
        }
        Ok(())
    }

    /// Both kernel integrals at every node.
    pub fn integrals(&self, x: &GridFunction) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(x)?;
        let k1 = self.problem.kernel(Which::First);
        let k2 = self.problem.kernel(Which::Second);
        let rows = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                Ok((
                    kernel_row(k1, &self.grid, x.values(), i)?,
                    kernel_row(k2, &self.grid, x.values(), i)?,
                ))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        Ok(rows.into_iter().unzip())
    }

    /// `(Fx)(t_i) = a(t_i) + Q₁(t_i)·Q₂(t_i)`.
    pub fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        let (q1, q2) = self.integrals(x)?;
        let values = self
            .forcing
            .iter()
            .zip(q1.iter().zip(&q2))
            .map(|(a, (i1, i2))| a + i1 * i2)
            .collect();
        GridFunction::new(self.grid, values)
    }

    /// `x − Fx` at every node.
    pub fn margin(&self, x: &GridFunction) -> Result<GridFunction> {
        let fx = self.apply(x)?;
        let values = x.values().iter().zip(fx.values()).map(|(a, b)| a - b).collect();
        GridFunction::new(self.grid, values)
    }

    /// `max_i |x(t_i) − (Fx)(t_i)|`.
    pub fn residual(&self, x: &GridFunction) -> Result<f64> {
        Ok(self.margin(x)?.sup_norm())
    }
}

pub fn apply_f(p: &Problem, x: &GridFunction) -> Result<GridFunction> {
    DiscreteOperator::new(p, x.grid())?.apply(x)
}

pub fn residual(p: &Problem, x: &GridFunction) -> Result<f64> {
    DiscreteOperator::new(p, x.grid())?.residual(x)
}

/// Starting iterate for [`picard_solve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialGuess {
    /// `x₀ = a` sampled on the grid.
    Forcing,
    Constant(f64),
    Given(GridFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub initial: InitialGuess,
    /// Damping halvings allowed after divergence signals.
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 500,
            damping: 1.0,
            initial: InitialGuess::Forcing,
            max_halvings: 6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping = {} must lie in (0, 1]",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub x: GridFunction,
    pub residual_history: Vec<f64>,
    /// Number of operator applications.
    pub iterations: usize,
    pub status: SolveStatus,
    /// `0 < x(t_i) ≤ r + tol` at every node.
    pub bounds_respected: bool,
    pub bounds: Bounds,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
    pub halvings: usize,
}

impl SolveResult {
    pub fn residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Damped Picard iteration `x_{k+1} = (1−θ)x_k + θ F(x_k)`.
///
/// A non-finite iterate or `sup|x_k| > 10 r` halves `θ` and restarts from
/// the last finite iterate, at most `max_halvings` times; after that the
/// result is `Diverged`.
pub fn picard_solve(p: &Problem, grid: Grid, cfg: &SolverConfig) -> Result<SolveResult> {
    let op = DiscreteOperator::new(p, grid)?;
    let bounds = op.bounds();
    solve_with(&op, &bounds, cfg)
}

pub fn solve_with(op: &DiscreteOperator<'_>, bounds: &Bounds, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let grid = op.grid();
    let mut x = match &cfg.initial {
        InitialGuess::Forcing => op.forcing_function(),
        InitialGuess::Constant(c) => GridFunction::constant(grid, *c)?,
        InitialGuess::Given(g) => {
            if g.grid() != grid {
                return Err(Error::GridMismatch("initial guess lives on another grid".into()));
            }
            g.clone()
        }
    };
    let limit = 10.0 * bounds.radius;
    let mut theta = cfg.damping;
    let mut halvings = 0;
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterations;

    for _ in 0..cfg.max_iter {
        let fx = op.apply(&x)?;
        let res = x.sup_distance(&fx)?;
        history.push(res);
        if res <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
        let next: Vec<f64> = x
            .values()
            .iter()
            .zip(fx.values())
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        let blown = next.iter().any(|v| !v.is_finite() || v.abs() > limit);
        if blown {
            if halvings == cfg.max_halvings {
                status = SolveStatus::Diverged;
                break;
            }
            halvings += 1;
            theta *= 0.5;
            log::debug!("divergence signal, damping halved to {theta}");
            continue;
        }
        x = GridFunction::new(grid, next)?;
    }

    let bounds_respected = x
        .values()
        .iter()
        .all(|&v| v > 0.0 && v <= bounds.radius + cfg.tol);
    Ok(SolveResult {
        iterations: history.len(),
        x,
        residual_history: history,
        status,
        bounds_respected,
        bounds: *bounds,
        damping: theta,
        halvings,
    })
}

/// Discrete uniform-boundedness and equicontinuity evidence for `F` at `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactnessAudit {
    pub sup_image: f64,
    pub radius: f64,
    pub bounded_ok: bool,
    /// Largest `|ΔFx| − bound` over panels; nonpositive when the modulus
    /// bound holds everywhere.
    pub max_excess: f64,
    pub worst_panel: usize,
    pub modulus_ok: bool,
}

/// Checks `sup|Fx| ≤ r` and, on every panel,
/// `|Fx(t_{i+1}) − Fx(t_i)| ≤ |Δa| + M₂·∫m₁ + M₁·∫m₂ + slack`, where the panel
/// integrals of the majorants take the larger of the evaluations at `t_i`
/// and `t_{i+1}` and `slack = 4h²·(M₂·κ₁ + M₁·κ₂)` with `κ_i` the declared
/// curvature bounds of the majorants. The bound on `sup|Fx|` also allows
/// the unresolved gap `|r − cap|` of the cap iteration.
pub fn compactness_audit(op: &DiscreteOperator<'_>, bounds: &Bounds, x: &GridFunction) -> Result<CompactnessAudit> {
    let p = op.problem();
    let grid = op.grid();
    let h = grid.step();
    let cap = bounds.majorant_cap();
    let fx = op.apply(x)?;
    let a = op.forcing();
    let sup_image = fx.sup_norm();
    let rounding = 1e-12 * bounds.radius.max(1.0);

    let kappa1 = p.majorant_curvature(Which::First, cap.min(bounds.radius));
    let kappa2 = p.majorant_curvature(Which::Second, cap.min(bounds.radius));
    let slack = 4.0 * h * h * (bounds.m2 * kappa1 + bounds.m1 * kappa2) + rounding;

    let panel = |which: Which, i: usize| {
        let (t0, t1) = (grid.node(i), grid.node(i + 1));
        let m = |s: f64| p.majorant(which, t0, s, cap).max(p.majorant(which, t1, s, cap));
        0.5 * h * (m(t0) + m(t1))
    };

    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_panel = 0;
    for i in 0..grid.panels() {
        let lhs = (fx.values()[i + 1] - fx.values()[i]).abs();
        let rhs = (a[i + 1] - a[i]).abs()
            + bounds.m2 * panel(Which::First, i)
            + bounds.m1 * panel(Which::Second, i)
            + slack;
        let excess = lhs - rhs;
        if excess > max_excess {
            max_excess = excess;
            worst_panel = i;
        }
    }
    Ok(CompactnessAudit {
        sup_image,
        radius: bounds.radius,
        bounded_ok: sup_image <= bounds.radius + (bounds.radius - cap).abs() + rounding,
        max_excess,
        worst_panel,
        modulus_ok: max_excess <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_manufactured, Forcing, Kernel};

    fn unit(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    fn zero_problem() -> Problem {
        Problem::new(1.0, Forcing::constant(1.0), Kernel::Zero, Kernel::Zero).unwrap()
    }

    fn manufactured_unit() -> Problem {
        let k = Kernel::affine_state(0.0, 0.5);
        make_manufactured(Forcing::constant(1.0), k.clone(), k, 1.0, 1024).unwrap()
    }

    #[test]
    fn apply_with_zero_kernels_returns_forcing() {
        let grid = unit(10);
        let x = GridFunction::from_fn(grid, |t| 3.0 + t).unwrap();
        let fx = apply_f(&zero_problem(), &x).unwrap();
        assert!(fx.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn apply_at_manufactured_solution() {
        let grid = unit(10);
        let one = GridFunction::constant(grid, 1.0).unwrap();
        let fx = apply_f(&manufactured_unit(), &one).unwrap();
        for v in fx.values() {
            assert!((v - 1.0).abs() <= 1e-12, "{v}");
        }
        assert!(residual(&manufactured_unit(), &one).unwrap() <= 1e-12);
    }

    #[test]
    fn apply_with_unit_affine_kernels() {
        let k = Kernel::affine_state(0.0, 1.0);
        let p = Problem::new(1.0, Forcing::constant(1.0), k.clone(), k).unwrap();
        let one = GridFunction::constant(unit(10), 1.0).unwrap();
        let fx = apply_f(&p, &one).unwrap();
        assert_eq!(fx.values()[10], 2.0);
        assert_eq!(fx.values()[0], 1.0);
    }

    #[test]
    fn residual_examples() {
        let p = zero_problem();
        let two = GridFunction::constant(unit(10), 2.0).unwrap();
        assert_eq!(residual(&p, &two).unwrap(), 1.0);
        let fixed = apply_f(&p, &two).unwrap();
        assert_eq!(residual(&p, &fixed).unwrap(), 0.0);
    }

    #[test]
    fn zero_kernels_converge_in_one_iteration() {
        let r = picard_solve(&zero_problem(), unit(10), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.residual(), 0.0);
        assert!(r.x.values().iter().all(|v| *v == 1.0));
        assert!(r.bounds_respected);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let cfg = SolverConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let r = picard_solve(&manufactured_unit(), unit(100), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let err = r.x.values().iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn quarter_kernels_stay_in_the_ball() {
        let k = Kernel::affine_state(0.0, 0.25);
        let p = Problem::new(1.0, Forcing::constant(1.0), k.clone(), k).unwrap();
        let cfg = SolverConfig::default();
        let r = picard_solve(&p, unit(200), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.x.values().iter().all(|&v| v >= 1.0 && v <= r.bounds.radius));

        // cross-check against a finer grid on the shared nodes
        let fine = picard_solve(&p, unit(800), &cfg).unwrap();
        let coarse = fine.x.restrict_to_coarse().unwrap().restrict_to_coarse().unwrap();
        let d = coarse.sup_distance(&r.x).unwrap();
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn residual_history_ends_below_tol_when_converged() {
        let r = picard_solve(&manufactured_unit(), unit(40), &SolverConfig::default()).unwrap();
        assert!(r.converged());
        assert!(r.residual() <= 1e-10);
        assert_eq!(r.residual_history.len(), r.iterations);
    }

    #[test]
    fn explosive_problem_is_reported_diverged() {
        // the product term blows up long before t = 1
        let k = Kernel::affine_state(0.0, 6.0);
        let p = Problem::new(1.0, Forcing::constant(1.0), k.clone(), k).unwrap();
        let cfg = SolverConfig {
            max_iter: 2000,
            ..Default::default()
        };
        let r = picard_solve(&p, unit(20), &cfg).unwrap();
        assert_ne!(r.status, SolveStatus::Converged);
    }

    #[test]
    fn max_iterations_reported() {
        let cfg = SolverConfig {
            max_iter: 2,
            tol: 1e-15,
            ..Default::default()
        };
        let r = picard_solve(&manufactured_unit(), unit(20), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIterations);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn invalid_solver_config() {
        for cfg in [
            SolverConfig {
                tol: 0.0,
                ..Default::default()
            },
            SolverConfig {
                damping: 1.5,
                ..Default::default()
            },
            SolverConfig {
                max_iter: 0,
                ..Default::default()
            },
        ] {
            assert!(picard_solve(&zero_problem(), unit(4), &cfg).is_err());
        }
    }

    #[test]
    fn compactness_audit_on_converged_solution() {
        let p = manufactured_unit();
        let op = DiscreteOperator::new(&p, unit(50)).unwrap();
        let b = op.bounds();
        let r = solve_with(&op, &b, &SolverConfig::default()).unwrap();
        let audit = compactness_audit(&op, &b, &r.x).unwrap();
        assert!(audit.modulus_ok, "{audit:?}");
    }
}
