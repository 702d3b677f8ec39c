//! Numerical audits of the standing hypotheses and the invariant-ball radius.
//!
//! The forcing must be continuous and nonnegative; each kernel must be
//! dominated by an x-free majorant `m_i(t, s)` whose prefix integrals are
//! bounded by `M_i`. Together they give the radius `r = a_sup + M₁·M₂` of
//! the set `S = {x : 0 < x ≤ r}` that the operator maps into itself.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::problem::{eval_forcing, Problem, Which};
use crate::quadrature::{check_horizon, Grid};

/// Sup bounds defining the invariant set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub a_sup: f64,
    pub m1: f64,
    pub m2: f64,
    /// `a_sup + m1 · m2`
    pub radius: f64,
    /// State bound the declared majorants were evaluated at; `None` when
    /// both majorants are independent of the state.
    pub x_cap: Option<f64>,
    pub cap_passes: usize,
    /// Whether the cap agrees with the radius to the requested tolerance.
    pub cap_converged: bool,
}

impl Bounds {
    /// Largest state value the majorants are known to dominate.
    pub fn majorant_cap(&self) -> f64 {
        self.x_cap.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions {
    pub max_cap_passes: usize,
    pub cap_tol: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            max_cap_passes: 5,
            cap_tol: 1e-9,
        }
    }
}

pub fn compute_bounds(p: &Problem, grid: &Grid) -> Result<Bounds> {
    compute_bounds_with(p, grid, &BoundsOptions::default())
}

pub fn compute_bounds_with(p: &Problem, grid: &Grid, opts: &BoundsOptions) -> Result<Bounds> {
    check_horizon(p, grid)?;
    let forcing = (0..grid.len())
        .into_par_iter()
        .map(|i| eval_forcing(p, grid.node(i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(bounds_from_forcing(p, grid, &forcing, opts))
}

/// Bounds from forcing values already sampled on `grid`.
///
/// Declared majorants of state-dependent kernels need a state bound. The
/// first pass uses `a_sup` (every solution dominates `a`); later passes use
/// the previous radius, until the cap and the radius agree within
/// `cap_tol` or the pass budget runs out.
pub(crate) fn bounds_from_forcing(p: &Problem, grid: &Grid, forcing: &[f64], opts: &BoundsOptions) -> Bounds {
    let a_sup = forcing.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let x_dependent = Which::BOTH.iter().any(|&w| p.majorant_depends_on_x(w));
    let mut cap = a_sup;
    let mut passes = 0;
    loop {
        passes += 1;
        let m1 = majorant_integral_bound(p, Which::First, grid, cap);
        let m2 = majorant_integral_bound(p, Which::Second, grid, cap);
        let radius = a_sup + m1 * m2;
        let converged = !x_dependent || (radius - cap).abs() < opts.cap_tol;
        if converged || passes >= opts.max_cap_passes.max(1) {
            return Bounds {
                a_sup,
                m1,
                m2,
                radius,
                x_cap: x_dependent.then_some(cap),
                cap_passes: passes,
                cap_converged: converged,
            };
        }
        cap = radius;
    }
}

/// `max_i ∫₀^{t_i} m(t_i, s) ds` on the grid.
fn majorant_integral_bound(p: &Problem, which: Which, grid: &Grid, cap: f64) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            grid.trapezoid_prefix(i, |j| p.majorant(which, t, grid.node(j), cap))
        })
        .reduce(|| 0.0, f64::max)
}

/// Sampling lattice over `[0,T]² × (0, x_max]`, restricted to `s ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lattice {
    pub t_samples: usize,
    pub s_samples: usize,
    pub x_samples: usize,
    pub x_max: f64,
    /// State bound handed to declared majorants.
    pub majorant_cap: f64,
}

impl Lattice {
    pub fn new(x_max: f64) -> Self {
        Lattice {
            t_samples: 33,
            s_samples: 33,
            x_samples: 9,
            x_max,
            majorant_cap: x_max,
        }
    }

    /// Lattice up to the radius, with majorants at the cap `bounds` used.
    pub fn for_bounds(bounds: &Bounds) -> Self {
        Lattice {
            majorant_cap: bounds.x_cap.unwrap_or(bounds.radius),
            ..Lattice::new(bounds.radius)
        }
    }

    fn times(n: usize, horizon: f64) -> Vec<f64> {
        let n = n.max(2) - 1;
        (0..=n).map(|i| horizon * (i as f64 / n as f64)).collect()
    }

    fn states(&self) -> Vec<f64> {
        let n = self.x_samples.max(1);
        (1..=n).map(|k| self.x_max * (k as f64 / n as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Relative slack in `|f| ≤ m`.
    pub majorant_tol: f64,
    /// Largest tolerated jump across a tiny state increment.
    pub continuity_tol: f64,
    /// Relative size of that increment.
    pub continuity_step: f64,
    /// Slack for the pairwise monotonicity checks.
    pub monotone_slack: f64,
    /// At most this many violations are kept per list.
    pub max_recorded: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            majorant_tol: 1e-8,
            continuity_tol: 1e-6,
            continuity_step: 1e-9,
            monotone_slack: 1e-12,
            max_recorded: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantViolation {
    pub kernel: &'static str,
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub f: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityViolation {
    pub kernel: &'static str,
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SampleCounts {
    pub lattice_points: usize,
    pub kernel_evaluations: usize,
    pub majorant_violations: usize,
    pub continuity_violations: usize,
    pub monotone_t_violations: usize,
    pub monotone_x_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaratheodoryReport {
    pub caratheodory_ok: bool,
    pub majorant_violations: Vec<MajorantViolation>,
    pub continuity_ok: bool,
    pub continuity_violations: Vec<ContinuityViolation>,
    pub lattice_points: usize,
    pub majorant_violation_count: usize,
    pub continuity_violation_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub nonincreasing_in_t_ok: bool,
    pub nondecreasing_in_x_ok: bool,
    pub t_violations: usize,
    pub x_violations: usize,
}

/// Full audit of the kernel hypotheses. `caratheodory_ok` holds exactly when
/// no majorant violation was found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub caratheodory_ok: bool,
    pub majorant_violations: Vec<MajorantViolation>,
    pub continuity_ok: bool,
    pub continuity_violations: Vec<ContinuityViolation>,
    pub nonincreasing_in_t_ok: bool,
    pub nondecreasing_in_x_ok: bool,
    pub forcing_strictly_positive: bool,
    pub sample_counts: SampleCounts,
}

impl AuditReport {
    /// Domination and continuity both hold on the lattice.
    pub fn hypotheses_ok(&self) -> bool {
        self.caratheodory_ok && self.continuity_ok
    }
}

pub fn audit(p: &Problem, lattice: &Lattice) -> AuditReport {
    audit_with(p, lattice, &AuditOptions::default())
}

pub fn audit_with(p: &Problem, lattice: &Lattice, opts: &AuditOptions) -> AuditReport {
    let c = audit_caratheodory_with(p, lattice, opts);
    let m = audit_monotonicity_with(p, lattice, opts);
    let points = c.lattice_points;
    AuditReport {
        caratheodory_ok: c.caratheodory_ok,
        majorant_violations: c.majorant_violations,
        continuity_ok: c.continuity_ok,
        continuity_violations: c.continuity_violations,
        nonincreasing_in_t_ok: m.nonincreasing_in_t_ok,
        nondecreasing_in_x_ok: m.nondecreasing_in_x_ok,
        forcing_strictly_positive: p.validation().forcing_strictly_positive,
        sample_counts: SampleCounts {
            lattice_points: points,
            // value + continuity probe per kernel and point
            kernel_evaluations: 2 * 2 * points,
            majorant_violations: c.majorant_violation_count,
            continuity_violations: c.continuity_violation_count,
            monotone_t_violations: m.t_violations,
            monotone_x_violations: m.x_violations,
        },
    }
}

pub fn audit_caratheodory(p: &Problem, lattice: &Lattice) -> CaratheodoryReport {
    audit_caratheodory_with(p, lattice, &AuditOptions::default())
}

/// Checks `|f_i| ≤ m_i` at every lattice point and probes continuity in `x`.
pub fn audit_caratheodory_with(p: &Problem, lattice: &Lattice, opts: &AuditOptions) -> CaratheodoryReport {
    let horizon = p.horizon();
    let ts = Lattice::times(lattice.t_samples, horizon);
    let ss = Lattice::times(lattice.s_samples, horizon);
    let xs = lattice.states();
    let dx = opts.continuity_step * lattice.x_max.max(1.0);

    let mut majorant_violations = Vec::new();
    let mut continuity_violations = Vec::new();
    let (mut n_major, mut n_cont, mut points) = (0, 0, 0);
    for &t in &ts {
        for &s in ss.iter().filter(|&&s| s <= t) {
            for &x in &xs {
                points += 1;
                for which in Which::BOTH {
                    let k = p.kernel(which);
                    let f = k.value(t, s, x);
                    let m = p.majorant(which, t, s, lattice.majorant_cap);
                    if !(f.abs() <= m + opts.majorant_tol * m.max(1.0)) {
                        n_major += 1;
                        if majorant_violations.len() < opts.max_recorded {
                            majorant_violations.push(MajorantViolation {
                                kernel: which.label(),
                                t,
                                s,
                                x,
                                f,
                                m,
                            });
                        }
                    }
                    let jump = (k.value(t, s, x + dx) - f)
                        .abs()
                        .max((k.value(t, s, (x - dx).max(0.0)) - f).abs());
                    if !(jump <= opts.continuity_tol) {
                        n_cont += 1;
                        if continuity_violations.len() < opts.max_recorded {
                            continuity_violations.push(ContinuityViolation {
                                kernel: which.label(),
                                t,
                                s,
                                x,
                                jump,
                            });
                        }
                    }
                }
            }
        }
    }
    CaratheodoryReport {
        caratheodory_ok: n_major == 0,
        majorant_violations,
        continuity_ok: n_cont == 0,
        continuity_violations,
        lattice_points: points,
        majorant_violation_count: n_major,
        continuity_violation_count: n_cont,
    }
}

pub fn audit_monotonicity(p: &Problem, lattice: &Lattice) -> MonotonicityReport {
    audit_monotonicity_with(p, lattice, &AuditOptions::default())
}

/// Pairwise checks on adjacent lattice samples: `f(t', s, x) ≤ f(t, s, x)`
/// for `t' > t`, and `f(t, s, x') ≥ f(t, s, x)` for `x' > x`.
pub fn audit_monotonicity_with(p: &Problem, lattice: &Lattice, opts: &AuditOptions) -> MonotonicityReport {
    let horizon = p.horizon();
    let ts = Lattice::times(lattice.t_samples, horizon);
    let ss = Lattice::times(lattice.s_samples, horizon);
    let xs = lattice.states();
    let slack = |v: f64| opts.monotone_slack * v.abs().max(1.0);

    let (mut t_bad, mut x_bad) = (0, 0);
    for which in Which::BOTH {
        let k = p.kernel(which);
        for &s in &ss {
            for &x in &xs {
                let row: Vec<f64> = ts.iter().filter(|&&t| t >= s).map(|&t| k.value(t, s, x)).collect();
                t_bad += row.windows(2).filter(|w| w[1] > w[0] + slack(w[0])).count();
            }
        }
        for &t in &ts {
            for &s in ss.iter().filter(|&&s| s <= t) {
                let col: Vec<f64> = xs.iter().map(|&x| k.value(t, s, x)).collect();
                x_bad += col.windows(2).filter(|w| w[1] < w[0] - slack(w[0])).count();
            }
        }
    }
    MonotonicityReport {
        nonincreasing_in_t_ok: t_bad == 0,
        nondecreasing_in_x_ok: x_bad == 0,
        t_violations: t_bad,
        x_violations: x_bad,
    }
}
