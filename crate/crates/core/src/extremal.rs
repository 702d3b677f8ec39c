//! Maximal and minimal solutions from the ε-shifted kernel families
//! `f_i ± ε`, and the sandwich check `n ≤ x ≤ q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::{compute_bounds, Lattice};
use crate::operator::{solve_with, DiscreteOperator, InitialGuess, SolveResult, SolverConfig};
use crate::problem::{Kernel, Majorant, Problem, Which};
use crate::quadrature::{Grid, GridFunction};

/// `ε_k = eps0 · rho^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    eps0: f64,
    rho: f64,
    count: usize,
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, rho: f64, count: usize) -> Result<Self> {
        if !(eps0.is_finite() && eps0 > 0.0) {
            return Err(Error::InvalidParameter(format!("eps0 = {eps0} must be positive")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho} must lie in (0, 1)")));
        }
        if count < 2 {
            return Err(Error::InvalidParameter(format!("count = {count} must be at least 2")));
        }
        Ok(EpsilonSchedule { eps0, rho, count })
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.eps0 * self.rho.powi(k as i32)).collect()
    }

    pub fn last(&self) -> f64 {
        self.eps0 * self.rho.powi(self.count as i32 - 1)
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps0: 0.1,
            rho: 0.5,
            count: 6,
        }
    }
}

/// `Plus` shifts kernels up and approaches the maximal solution from above;
/// `Minus` shifts down toward the minimal solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedProblem {
    pub problem: Problem,
    pub eps: f64,
    pub sign: Sign,
    /// `Minus` only: `eps` exceeds the smallest kernel value on the audit
    /// lattice, so the shifted kernels are clamped at zero somewhere.
    pub negative_kernel: bool,
}

/// Kernels become `max(f_i ± eps, 0)`; for `Plus` explicit majorants are
/// raised by `eps` (declared ones follow the shifted kernel automatically).
pub fn perturb_problem(p: &Problem, eps: f64, sign: Sign) -> Result<PerturbedProblem> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be nonnegative")));
    }
    if eps == 0.0 {
        return Ok(PerturbedProblem {
            problem: p.clone(),
            eps,
            sign,
            negative_kernel: false,
        });
    }
    let shift = sign.factor() * eps;
    let kernel = |w: Which| Kernel::perturbed(p.kernel(w).clone(), shift);
    let majorant = |w: Which| match (sign, p.majorant_spec(w)) {
        (Sign::Plus, Majorant::Declared) | (Sign::Minus, _) => p.majorant_spec(w).clone(),
        (Sign::Plus, m) => Majorant::Shifted {
            base: Box::new(m.clone()),
            shift: eps,
        },
    };
    let problem = p.with_kernels(
        kernel(Which::First),
        kernel(Which::Second),
        majorant(Which::First),
        majorant(Which::Second),
    )?;
    let negative_kernel = sign == Sign::Minus && eps > lattice_infimum(p)?;
    Ok(PerturbedProblem {
        problem,
        eps,
        sign,
        negative_kernel,
    })
}

/// Smallest kernel value over the default audit lattice up to the radius.
fn lattice_infimum(p: &Problem) -> Result<f64> {
    let grid = Grid::new(p.horizon(), 64)?;
    let lattice = Lattice::new(compute_bounds(p, &grid)?.radius);
    let n_t = lattice.t_samples - 1;
    let n_x = lattice.x_samples;
    let mut inf = f64::INFINITY;
    for a in 0..=n_t {
        let t = p.horizon() * (a as f64 / n_t as f64);
        for b in 0..=a {
            let s = p.horizon() * (b as f64 / n_t as f64);
            for k in 1..=n_x {
                let x = lattice.x_max * (k as f64 / n_x as f64);
                for w in Which::BOTH {
                    inf = inf.min(p.kernel(w).value(t, s, x));
                }
            }
        }
    }
    Ok(inf)
}

/// Whether `f_i(t_i, s_j, x_j) − eps < 0` at some grid pair `s_j ≤ t_i`.
fn clamp_active(p: &Problem, x: &GridFunction, eps: f64) -> bool {
    let grid = x.grid();
    (0..grid.len()).any(|i| {
        let t = grid.node(i);
        (0..=i).any(|j| {
            Which::BOTH
                .iter()
                .any(|&w| p.kernel(w).value(t, grid.node(j), x.values()[j]) < eps)
        })
    })
}

/// How the ε → 0 limit is estimated from the last members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Two-point, linear in ε.
    Linear,
    /// Three-point, quadratic in ε; falls back to linear with two members.
    Quadratic,
}

impl Extrapolation {
    fn points(self) -> usize {
        match self {
            Extrapolation::Linear => 2,
            Extrapolation::Quadratic => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyOptions {
    pub ordering_slack: f64,
    /// Start each member from the previous member's solution. Without it
    /// the members are solved concurrently.
    pub warm_start: bool,
    pub extrapolation: Extrapolation,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            ordering_slack: 1e-8,
            warm_start: true,
            extrapolation: Extrapolation::Quadratic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyMember {
    pub eps: f64,
    pub result: SolveResult,
    /// Lattice pre-check flagged possible clamping (`Minus` only).
    pub negative_kernel: bool,
    /// Clamping happens at the computed solution.
    pub clamp_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonFamily {
    pub schedule: EpsilonSchedule,
    pub sign: Sign,
    pub members: Vec<FamilyMember>,
    pub extremal_estimate: GridFunction,
    pub extrapolation: Extrapolation,
    /// Consecutive members move monotonically toward the limit.
    pub ordering_ok: bool,
    /// Largest violation of that monotonicity (nonpositive when none).
    pub worst_ordering_violation: f64,
    /// Where it occurs: between members `k` and `k + 1`, at this node.
    pub worst_ordering_member: usize,
    pub worst_ordering_node: usize,
}

impl EpsilonFamily {
    pub fn solutions(&self) -> impl Iterator<Item = &GridFunction> {
        self.members.iter().map(|m| &m.result.x)
    }

    pub fn negative_kernel(&self) -> bool {
        self.members.iter().any(|m| m.negative_kernel)
    }
}

pub fn solve_family(
    p: &Problem,
    grid: Grid,
    schedule: &EpsilonSchedule,
    sign: Sign,
    cfg: &SolverConfig,
    opts: &FamilyOptions,
) -> Result<EpsilonFamily> {
    let eps = schedule.epsilons();
    let solve_member = |e: f64, initial: InitialGuess| -> Result<FamilyMember> {
        let perturbed = perturb_problem(p, e, sign)?;
        let op = DiscreteOperator::new(&perturbed.problem, grid)?;
        let bounds = op.bounds();
        let cfg = SolverConfig {
            initial,
            ..cfg.clone()
        };
        let result = solve_with(&op, &bounds, &cfg)?;
        let clamp = sign == Sign::Minus && clamp_active(p, &result.x, e);
        Ok(FamilyMember {
            eps: e,
            result,
            negative_kernel: perturbed.negative_kernel,
            clamp_active: clamp,
        })
    };

    let members: Vec<FamilyMember> = if opts.warm_start {
        let mut out: Vec<FamilyMember> = Vec::with_capacity(eps.len());
        for &e in &eps {
            let initial = match out.last() {
                Some(prev) => InitialGuess::Given(prev.result.x.clone()),
                None => cfg.initial.clone(),
            };
            out.push(solve_member(e, initial)?);
        }
        out
    } else {
        eps.par_iter()
            .map(|&e| solve_member(e, cfg.initial.clone()))
            .collect::<Result<_>>()?
    };

    if let Some((index, m)) = members.iter().enumerate().find(|(_, m)| !m.result.converged()) {
        return Err(Error::FamilySolveFailed {
            index,
            eps: m.eps,
            status: m.result.status,
        });
    }

    // Plus: x_{ε_{k+1}} ≤ x_{ε_k}; Minus: the reverse.
    let (mut worst, mut worst_member, mut worst_node) = (f64::NEG_INFINITY, 0, 0);
    for (k, pair) in members.windows(2).enumerate() {
        let older = pair[0].result.x.values();
        let newer = pair[1].result.x.values();
        for (i, (o, n)) in older.iter().zip(newer).enumerate() {
            let violation = sign.factor() * (n - o);
            if violation > worst {
                (worst, worst_member, worst_node) = (violation, k, i);
            }
        }
    }
    let extremal_estimate = extrapolate(&members, opts.extrapolation.points())?;
    Ok(EpsilonFamily {
        schedule: *schedule,
        sign,
        members,
        extremal_estimate,
        extrapolation: opts.extrapolation,
        ordering_ok: worst <= opts.ordering_slack,
        worst_ordering_violation: worst,
        worst_ordering_member: worst_member,
        worst_ordering_node: worst_node,
    })
}

/// Polynomial extrapolation to ε = 0 through the last `points` members.
/// With two points this is `x_l + (x_l − x_p)·ε_l/(ε_p − ε_l)`.
fn extrapolate(members: &[FamilyMember], points: usize) -> Result<GridFunction> {
    let k = points.min(members.len());
    let tail = &members[members.len() - k..];
    let weights: Vec<f64> = (0..k)
        .map(|j| {
            (0..k)
                .filter(|&m| m != j)
                .map(|m| -tail[m].eps / (tail[j].eps - tail[m].eps))
                .product()
        })
        .collect();
    let grid = tail[0].result.x.grid();
    let values = (0..grid.len())
        .map(|i| tail.iter().zip(&weights).map(|(m, w)| w * m.result.x.values()[i]).sum())
        .collect();
    GridFunction::new(grid, values)
}

/// Extrapolated limits from each run of consecutive members, in schedule order.
pub fn suffix_estimates(family: &EpsilonFamily) -> Result<Vec<GridFunction>> {
    let k = family.extrapolation.points().min(family.members.len());
    (k..=family.members.len())
        .map(|end| extrapolate(&family.members[end - k..end], k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichVerdict {
    pub holds: bool,
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// Node with the largest excess over the allowed band.
    pub worst_node: usize,
    pub worst_excess: f64,
    pub slack: f64,
}

/// `n(t_i) − slack ≤ x(t_i) ≤ q(t_i) + slack` at every node; either side
/// may be omitted.
pub fn sandwich_check(
    x: &GridFunction,
    upper: Option<&GridFunction>,
    lower: Option<&GridFunction>,
    slack: f64,
) -> Result<SandwichVerdict> {
    for g in upper.iter().chain(lower.iter()) {
        x.check_same_grid(g)?;
    }
    let mut worst_node = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let (mut upper_ok, mut lower_ok) = (true, true);
    for (i, &xi) in x.values().iter().enumerate() {
        if let Some(q) = upper {
            let e = xi - q.values()[i] - slack;
            upper_ok &= e <= 0.0;
            if e > worst_excess {
                worst_excess = e;
                worst_node = i;
            }
        }
        if let Some(n) = lower {
            let e = n.values()[i] - slack - xi;
            lower_ok &= e <= 0.0;
            if e > worst_excess {
                worst_excess = e;
                worst_node = i;
            }
        }
    }
    Ok(SandwichVerdict {
        holds: upper_ok && lower_ok,
        upper_ok,
        lower_ok,
        worst_node,
        worst_excess,
        slack,
    })
}
