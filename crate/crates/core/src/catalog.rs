//! Built-in problems: the manufactured-solution corpus and a seeded
//! generator of random catalog problems with nondecreasing-in-x kernels.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{picard_solve, SolveStatus, SolverConfig};
use crate::problem::{make_manufactured, Forcing, Kernel, Problem, StateMap, Weight};
use crate::quadrature::{least_squares_slope, Grid, GridFunction, Order, OrderStudy};

/// Oracle panels for the corpus forcing terms.
pub const CORPUS_ORACLE_PANELS: usize = 4096;

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub x_star: Forcing,
    pub problem: Problem,
}

impl CorpusEntry {
    pub fn exact_on(&self, grid: Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |t| self.x_star.value(t))
    }
}

fn entry(id: &'static str, x_star: Forcing, f1: Kernel, f2: Kernel, horizon: f64) -> Result<CorpusEntry> {
    let problem = make_manufactured(x_star.clone(), f1, f2, horizon, CORPUS_ORACLE_PANELS)?;
    Ok(CorpusEntry { id, x_star, problem })
}

fn separable(weight: Weight, state: StateMap) -> Kernel {
    Kernel::SeparableProduct { weight, state }
}

/// Eight manufactured problems with known solutions. All kernels are
/// nondecreasing in `x`; the first three integrate exactly on any grid.
pub fn manufactured_corpus() -> Result<Vec<CorpusEntry>> {
    let half = Kernel::capped_affine_state(0.0, 0.5, 2.0);
    vec![
        entry("unit-affine", Forcing::constant(1.0), half.clone(), half, 1.0),
        entry(
            "ramp-zero",
            Forcing::Polynomial { coeffs: vec![1.0, 1.0] },
            Kernel::Zero,
            Kernel::Zero,
            1.0,
        ),
        entry(
            "ramp-affine",
            Forcing::Polynomial { coeffs: vec![1.0, 1.0] },
            Kernel::capped_affine_state(0.1, 0.2, 4.0),
            Kernel::capped_affine_state(0.2, 0.1, 4.0),
            1.0,
        ),
        entry(
            "sine-decay",
            Forcing::Sine {
                offset: 1.0,
                amplitude: 0.5,
                frequency: 2.0,
            },
            separable(Weight::ExpDecay { scale: 0.5, rate: 1.0 }, StateMap::Saturating { c: 1.0, k: 1.0 }),
            Kernel::capped_affine_state(0.3, 0.2, 3.0),
            1.0,
        ),
        entry(
            "exp-time-free",
            Forcing::Exp { scale: 1.0, rate: 0.3 },
            Kernel::ConstantInT {
                c0: 0.4,
                cs: 0.2,
                state: StateMap::Saturating { c: 2.0, k: 1.0 },
            },
            Kernel::ConstantInT {
                c0: 0.3,
                cs: 0.0,
                state: StateMap::Saturating { c: 1.0, k: 0.5 },
            },
            1.0,
        ),
        entry(
            "inverse-tilted",
            Forcing::InverseAffine {
                c: 2.0,
                b0: 1.0,
                b1: 1.0,
            },
            separable(
                Weight::Affine {
                    c0: 0.5,
                    ct: -0.2,
                    cs: 0.1,
                },
                StateMap::Saturating { c: 1.0, k: 2.0 },
            ),
            Kernel::capped_affine_state(0.1, 0.3, 3.0),
            1.0,
        ),
        entry(
            "long-horizon",
            Forcing::Polynomial {
                coeffs: vec![1.0, 0.0, 0.25],
            },
            separable(Weight::ExpDecay { scale: 0.3, rate: 0.5 }, StateMap::Saturating { c: 1.0, k: 1.0 }),
            Kernel::capped_affine_state(0.05, 0.1, 4.0),
            2.0,
        ),
        entry(
            "flat-linear",
            Forcing::constant(1.5),
            separable(
                Weight::Affine {
                    c0: 0.2,
                    ct: 0.0,
                    cs: 0.1,
                },
                StateMap::Linear { c0: 0.1, c1: 0.1 },
            ),
            separable(
                Weight::Affine {
                    c0: 0.2,
                    ct: 0.0,
                    cs: 0.1,
                },
                StateMap::Linear { c0: 0.1, c1: 0.1 },
            ),
            1.0,
        ),
    ]
    .into_iter()
    .collect()
}

/// One row of the corpus table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusOutcome {
    pub id: String,
    pub grid_n: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub sup_error: f64,
    pub passed: bool,
}

/// Solves every corpus problem on `grid_n` panels and compares with the
/// manufactured solution. Results come back in corpus order.
pub fn run_corpus(corpus: &[CorpusEntry], grid_n: usize, cfg: &SolverConfig, max_error: f64) -> Result<Vec<CorpusOutcome>> {
    corpus
        .par_iter()
        .map(|e| {
            let grid = Grid::new(e.problem.horizon(), grid_n)?;
            let r = picard_solve(&e.problem, grid, cfg)?;
            let sup_error = r.x.sup_distance(&e.exact_on(grid)?)?;
            Ok(CorpusOutcome {
                id: e.id.to_string(),
                grid_n,
                status: r.status,
                iterations: r.iterations,
                residual: r.residual(),
                sup_error,
                passed: r.converged() && sup_error <= max_error,
            })
        })
        .collect()
}

/// Differences below this, relative to the solution size, count as exact.
const REFINEMENT_EXACT_LEVEL: f64 = 1e-12;

/// Observed order of the solver under grid refinement: the errors are
/// `max_i |x_{2n}(t_i) − x_n(t_i)|` on the coarse nodes, one per entry of
/// `panels`, and the order is their least-squares slope against `log h`.
pub fn refinement_order(p: &Problem, panels: &[usize], cfg: &SolverConfig) -> Result<OrderStudy> {
    if panels.len() < 2 || panels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "panel sequence must be strictly increasing with at least 2 entries".into(),
        ));
    }
    let solve = |n: usize| -> Result<GridFunction> {
        let r = picard_solve(p, Grid::new(p.horizon(), n)?, cfg)?;
        if !r.converged() {
            return Err(Error::InvalidParameter(format!("solve on {n} panels ended {:?}", r.status)));
        }
        Ok(r.x)
    };
    let diffs = panels
        .par_iter()
        .map(|&n| -> Result<(f64, f64)> {
            let coarse = solve(n)?;
            let fine = solve(2 * n)?.restrict_to_coarse()?;
            Ok((fine.sup_distance(&coarse)?, coarse.sup_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = diffs.iter().map(|d| d.0).collect();
    let scale = diffs.iter().fold(1.0_f64, |m, d| m.max(d.1));
    let order = if errors.iter().all(|&e| e <= REFINEMENT_EXACT_LEVEL * scale) {
        Order::Exact
    } else {
        let pts: Vec<(f64, f64)> = panels
            .iter()
            .zip(&errors)
            .map(|(&n, &e)| ((p.horizon() / n as f64).ln(), e.max(f64::MIN_POSITIVE).ln()))
            .collect();
        Order::Observed(least_squares_slope(&pts))
    };
    Ok(OrderStudy {
        panels: panels.to_vec(),
        errors,
        order,
    })
}

fn random_state<R: Rng>(rng: &mut R) -> StateMap {
    match rng.gen_range(0..3) {
        0 => StateMap::Linear {
            c0: rng.gen_range(0.0..0.4),
            c1: rng.gen_range(0.0..0.3),
        },
        1 => StateMap::Saturating {
            c: rng.gen_range(0.1..1.0),
            k: rng.gen_range(0.5..2.0),
        },
        _ => StateMap::Sqrt {
            c: rng.gen_range(0.05..0.5),
        },
    }
}

fn random_kernel<R: Rng>(rng: &mut R) -> Kernel {
    match rng.gen_range(0..10) {
        0 => Kernel::Zero,
        1 | 2 => Kernel::AffineState {
            c0: rng.gen_range(0.0..0.4),
            c1: rng.gen_range(0.0..0.3),
            cap: rng.gen_bool(0.5).then(|| rng.gen_range(2.0..4.0)),
        },
        3 | 4 => Kernel::ConstantInT {
            c0: rng.gen_range(0.05..0.5),
            cs: rng.gen_range(0.0..0.3),
            state: random_state(rng),
        },
        5..=7 => Kernel::SeparableProduct {
            weight: Weight::Affine {
                c0: rng.gen_range(0.2..0.6),
                ct: -rng.gen_range(0.0..0.1),
                cs: rng.gen_range(0.0..0.2),
            },
            state: random_state(rng),
        },
        _ => Kernel::SeparableProduct {
            weight: Weight::ExpDecay {
                scale: rng.gen_range(0.1..0.6),
                rate: rng.gen_range(0.0..2.0),
            },
            state: random_state(rng),
        },
    }
}

fn random_forcing<R: Rng>(rng: &mut R) -> Forcing {
    match rng.gen_range(0..4) {
        0 => Forcing::constant(rng.gen_range(0.2..2.0)),
        1 => Forcing::Polynomial {
            coeffs: vec![rng.gen_range(0.5..1.5), rng.gen_range(0.0..0.5)],
        },
        2 => Forcing::Exp {
            scale: rng.gen_range(0.5..1.5),
            rate: rng.gen_range(-0.5..0.5),
        },
        _ => Forcing::Sine {
            offset: rng.gen_range(1.0..2.0),
            amplitude: rng.gen_range(0.0..0.5),
            frequency: rng.gen_range(0.0..3.0),
        },
    }
}

/// Random problem on `[0, T]`, `T ∈ [0.5, 1.5)`, whose kernels are all
/// declared nondecreasing in `x`.
pub fn random_monotone_problem<R: Rng>(rng: &mut R) -> Result<Problem> {
    let horizon = rng.gen_range(0.5..1.5);
    let forcing = random_forcing(rng);
    let f1 = random_kernel(rng);
    let f2 = random_kernel(rng);
    Problem::new(horizon, forcing, f1, f2)
}
