//! Uniform grids and composite-trapezoid prefix integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Forcing, Kernel, Problem, Which};

/// Uniform grid on `[0, T]` with `n` panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    n: usize,
}

impl Grid {
    pub fn new(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("grid horizon T = {horizon} must be positive")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs n >= 2 panels, got {n}")));
        }
        Ok(Grid { horizon, n })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of panels.
    pub fn panels(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    /// `t_i = T · (i / n)`, so `t_0 = 0` and `t_n = T` exactly.
    pub fn node(&self, i: usize) -> f64 {
        self.horizon * (i as f64 / self.n as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }

    /// Composite trapezoid `Σ w_j g_j` over nodes `0..=i` scaled to `[0, t_i]`.
    /// The sum is formed in units of panels and scaled by `T/n` last, so a
    /// unit integrand integrates to `t_i` bit-exactly.
    pub fn trapezoid_prefix(&self, i: usize, mut g: impl FnMut(usize) -> f64) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let mut sum = 0.5 * g(0);
        for j in 1..i {
            sum += g(j);
        }
        sum += 0.5 * g(i);
        self.horizon * (sum / self.n as f64)
    }
}

/// Values of a function at the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Evaluation {
                context: format!("grid function at node {i}"),
                value: *v,
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GridFunction::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete sup norm.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i − other_i|`.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// Values at the nodes shared with a grid of half as many panels.
    pub fn restrict_to_coarse(&self) -> Result<GridFunction> {
        if !self.grid.n.is_multiple_of(2) {
            return Err(Error::GridMismatch(format!("cannot halve {} panels", self.grid.n)));
        }
        let coarse = Grid::new(self.grid.horizon, self.grid.n / 2)?;
        GridFunction::new(coarse, self.values.iter().step_by(2).copied().collect())
    }
}

/// `P(t_i) = h·(g₀/2 + Σ_{j=1}^{i−1} g_j + g_i/2)`, `P(t_0) = 0`.
pub fn prefix_integral(g: &GridFunction) -> GridFunction {
    let grid = g.grid;
    let n = grid.n as f64;
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    // interior sum of g_1..g_{i-1}
    let mut interior = 0.0;
    for i in 1..grid.len() {
        let sum = 0.5 * g.values[0] + interior + 0.5 * g.values[i];
        out.push(grid.horizon * (sum / n));
        interior += g.values[i];
    }
    GridFunction { grid, values: out }
}

/// Trapezoid of `s ↦ k(t_i, s, x(s))` over the nodes `s_0..s_i`.
pub(crate) fn kernel_row(k: &Kernel, grid: &Grid, x: &[f64], i: usize) -> Result<f64> {
    let t = grid.node(i);
    let mut bad = None;
    let v = grid.trapezoid_prefix(i, |j| {
        let f = k.value(t, grid.node(j), x[j]);
        if !(f.is_finite() && f >= 0.0) && bad.is_none() {
            bad = Some((j, f));
        }
        f
    });
    match bad {
        Some((j, f)) => Err(Error::Evaluation {
            context: format!("kernel at (t, s, x) = ({t}, {}, {})", grid.node(j), x[j]),
            value: f,
        }),
        None => Ok(v),
    }
}

/// `∫₀^{t_i} f_which(t_i, s, x(s)) ds` by the trapezoid rule on the grid of `x`.
pub fn kernel_prefix_integral(p: &Problem, which: Which, x: &GridFunction, i: usize) -> Result<f64> {
    let grid = x.grid();
    check_horizon(p, &grid)?;
    if i > grid.n {
        return Err(Error::Domain {
            what: "node index",
            value: i as f64,
            lo: 0.0,
            hi: grid.n as f64,
        });
    }
    if x.values()[..=i].iter().any(|v| *v <= 0.0) {
        log::warn!("kernel integral evaluated on a state that is not strictly positive");
    }
    kernel_row(p.kernel(which), &grid, x.values(), i)
}

pub(crate) fn check_horizon(p: &Problem, grid: &Grid) -> Result<()> {
    let (a, b) = (p.horizon(), grid.horizon());
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(Error::GridMismatch(format!("grid horizon {b} vs problem horizon {a}")));
    }
    Ok(())
}

/// Composite trapezoid of `g` over `[lo, hi]` with `n` panels.
pub fn trapezoid(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let width = hi - lo;
    let mut sum = 0.5 * (g(lo) + g(hi));
    for j in 1..n {
        sum += g(lo + width * (j as f64 / n as f64));
    }
    width * (sum / n as f64)
}

/// Reference value used by [`convergence_order`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    /// Trapezoid with this many panels.
    Dense(usize),
    Exact(f64),
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle::Dense(1_000_000)
    }
}

/// Observed order of accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Order {
    /// Every error is at rounding level.
    Exact,
    Observed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub panels: Vec<usize>,
    pub errors: Vec<f64>,
    pub order: Order,
}

/// Errors below this (relative to the integral's magnitude) count as exact.
const EXACT_LEVEL: f64 = 1e-13;

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn convergence_order(
    g: &Forcing,
    interval: (f64, f64),
    panels: &[usize],
    oracle: Oracle,
) -> Result<OrderStudy> {
    if panels.len() < 3 || panels.windows(2).any(|w| w[0] >= w[1]) || panels[0] == 0 {
        return Err(Error::InvalidParameter(
            "panel sequence must be strictly increasing with at least 3 entries".into(),
        ));
    }
    let (lo, hi) = interval;
    let reference = match oracle {
        Oracle::Dense(n) => trapezoid(|s| g.value(s), lo, hi, n),
        Oracle::Exact(v) => v,
    };
    let errors: Vec<f64> = panels
        .iter()
        .map(|&n| (trapezoid(|s| g.value(s), lo, hi, n) - reference).abs())
        .collect();
    let floor = EXACT_LEVEL * reference.abs().max(1.0);
    let order = if errors.iter().all(|&e| e <= floor) {
        Order::Exact
    } else {
        let pts: Vec<(f64, f64)> = panels
            .iter()
            .zip(&errors)
            .map(|(&n, &e)| (((hi - lo) / n as f64).ln(), e.max(f64::MIN_POSITIVE).ln()))
            .collect();
        Order::Observed(least_squares_slope(&pts))
    };
    Ok(OrderStudy {
        panels: panels.to_vec(),
        errors,
        order,
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        for n in [2, 3, 7, 10, 49, 97, 1000] {
            for horizon in [0.1, 0.3, 1.0, 2.7, 10.0] {
                let g = Grid::new(horizon, n).unwrap();
                assert_eq!(g.node(0), 0.0);
                assert_eq!(g.node(n), horizon);
            }
        }
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(-1.0, 4).is_err());
    }

    #[test]
    fn prefix_of_constant_is_exact() {
        let grid = unit(10);
        let p = prefix_integral(&GridFunction::constant(grid, 1.0).unwrap());
        for (i, v) in p.values().iter().enumerate() {
            assert_eq!(*v, grid.node(i));
        }
    }

    #[test]
    fn prefix_of_square() {
        let grid = unit(10);
        let g = GridFunction::from_fn(grid, |s| s * s).unwrap();
        let p = prefix_integral(&g);
        // frozen from a 10^6-panel trapezoid plus the h²/12 error term
        assert!((p.values()[10] - 0.335).abs() < 1e-12);
        let dense = trapezoid(|s| s * s, 0.0, 1.0, 1_000_000);
        assert!((p.values()[10] - dense - 0.01 / 12.0 * 2.0).abs() < 1e-9);
    }

    #[test]
    fn prefix_of_zero() {
        let grid = unit(10);
        let p = prefix_integral(&GridFunction::constant(grid, 0.0).unwrap());
        assert!(p.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trapezoid_prefix_matches_prefix_integral() {
        let grid = Grid::new(2.5, 37).unwrap();
        let g = GridFunction::from_fn(grid, |s| (s * 1.3).cos() + 2.0).unwrap();
        let p = prefix_integral(&g);
        for i in 0..grid.len() {
            let q = grid.trapezoid_prefix(i, |j| g.values()[j]);
            assert!((p.values()[i] - q).abs() <= 1e-14 * p.values()[i].abs().max(1.0));
        }
    }

    #[test]
    fn order_of_smooth_integrands() {
        let ns = [10, 20, 40, 80];
        let sq = Forcing::Polynomial {
            coeffs: vec![0.0, 0.0, 1.0],
        };
        match convergence_order(&sq, (0.0, 1.0), &ns, Oracle::default()).unwrap().order {
            Order::Observed(p) => assert!((p - 2.0).abs() < 0.1, "{p}"),
            o => panic!("{o:?}"),
        }
        let exp = Forcing::Exp { scale: 1.0, rate: 1.0 };
        let oracle = Oracle::Exact(std::f64::consts::E - 1.0);
        match convergence_order(&exp, (0.0, 1.0), &ns, oracle).unwrap().order {
            Order::Observed(p) => assert!((p - 2.0).abs() < 0.1, "{p}"),
            o => panic!("{o:?}"),
        }
        let c = Forcing::constant(3.0);
        assert_eq!(
            convergence_order(&c, (0.0, 1.0), &ns, Oracle::default()).unwrap().order,
            Order::Exact
        );
    }

    #[test]
    fn order_rejects_short_sequences() {
        let c = Forcing::constant(1.0);
        assert!(convergence_order(&c, (0.0, 1.0), &[10, 20], Oracle::default()).is_err());
        assert!(convergence_order(&c, (0.0, 1.0), &[10, 20, 20], Oracle::default()).is_err());
    }

    #[test]
    fn kernel_prefix_examples() {
        let grid = unit(10);
        let one = GridFunction::constant(grid, 1.0).unwrap();
        let p = Problem::new(1.0, Forcing::constant(1.0), Kernel::Zero, Kernel::affine_state(0.0, 0.5)).unwrap();
        assert_eq!(kernel_prefix_integral(&p, Which::First, &one, 7).unwrap(), 0.0);
        assert_eq!(kernel_prefix_integral(&p, Which::Second, &one, 10).unwrap(), 0.5);
        assert_eq!(kernel_prefix_integral(&p, Which::Second, &one, 0).unwrap(), 0.0);
        assert!(kernel_prefix_integral(&p, Which::Second, &one, 11).is_err());
        let other = GridFunction::constant(Grid::new(2.0, 10).unwrap(), 1.0).unwrap();
        assert!(kernel_prefix_integral(&p, Which::Second, &other, 3).is_err());
    }

    #[test]
    fn grid_function_rejects_bad_input() {
        let grid = unit(4);
        assert!(GridFunction::new(grid, vec![1.0; 4]).is_err());
        assert!(GridFunction::new(grid, vec![1.0, 2.0, f64::NAN, 1.0, 1.0]).is_err());
    }
}
