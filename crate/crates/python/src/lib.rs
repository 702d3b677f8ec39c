//! Python bindings: problems are exchanged as JSON or TOML text in the same
//! schema as the CLI `[problem]` table; reports come back as dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use urysohn_core::catalog::{manufactured_corpus, run_corpus as core_run_corpus};
use urysohn_core::comparison::{comparison_harness as core_harness, HarnessConfig};
use urysohn_core::extremal::{sandwich_check, solve_family, FamilyOptions};
use urysohn_core::hypotheses::{audit as core_audit, compute_bounds};
use urysohn_core::operator::picard_solve;
use urysohn_core::problem::eval_forcing;
use urysohn_core::quadrature::{convergence_order as core_order, Oracle, Order};
use urysohn_core::{EpsilonSchedule, Error, Forcing, Grid, GridFunction, Lattice, Problem, Sign, SolverConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::FamilySolveFailed { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn grid(p: &Problem, n: usize) -> PyResult<Grid> {
    Grid::new(p.horizon(), n).map_err(py_err)
}

fn solver(tol: f64, max_iter: usize, damping: f64) -> SolverConfig {
    SolverConfig {
        tol,
        max_iter,
        damping,
        ..Default::default()
    }
}

/// Validated problem instance on `[0, T]`.
#[pyclass(name = "Problem", module = "urysohn", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| PyProblem { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        toml::from_str(text)
            .map(|inner| PyProblem { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("problem serializes")
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    /// Forcing term `a(t)`.
    fn forcing(&self, t: f64) -> PyResult<f64> {
        eval_forcing(&self.inner, t).map_err(py_err)
    }

    /// Same problem with the two kernels exchanged.
    fn swapped(&self) -> Self {
        PyProblem {
            inner: self.inner.swapped(),
        }
    }

    fn fingerprint(&self) -> u64 {
        self.inner.fingerprint()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.to_json())
    }
}

#[pyclass(name = "Solution", module = "urysohn", frozen)]
struct PySolution {
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    residual_history: Vec<f64>,
    /// Invariant-ball radius `r`.
    #[pyo3(get)]
    radius: f64,
    #[pyo3(get)]
    bounds_respected: bool,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn converged(&self) -> bool {
        self.status == "Converged"
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(status={}, iterations={}, residual={:e}, n={})",
            self.status,
            self.iterations,
            self.residual,
            self.x.len() - 1
        )
    }
}

#[pyfunction]
#[pyo3(signature = (problem, grid_n = 100, tol = 1e-10, max_iter = 500, damping = 1.0))]
fn solve(problem: &PyProblem, grid_n: usize, tol: f64, max_iter: usize, damping: f64) -> PyResult<PySolution> {
    let g = grid(&problem.inner, grid_n)?;
    let r = picard_solve(&problem.inner, g, &solver(tol, max_iter, damping)).map_err(py_err)?;
    Ok(PySolution {
        t: g.nodes().collect(),
        status: format!("{:?}", r.status),
        iterations: r.iterations,
        residual: r.residual(),
        radius: r.bounds.radius,
        bounds_respected: r.bounds_respected,
        residual_history: r.residual_history,
        x: r.x.into_values(),
    })
}

/// Invariant-ball bounds `a_sup`, `m1`, `m2`, `radius`.
#[pyfunction]
#[pyo3(signature = (problem, grid_n = 100))]
fn bounds<'py>(py: Python<'py>, problem: &PyProblem, grid_n: usize) -> PyResult<Bound<'py, PyAny>> {
    let b = compute_bounds(&problem.inner, &grid(&problem.inner, grid_n)?).map_err(py_err)?;
    to_py(py, &b)
}

/// Lattice audit of the kernel hypotheses.
#[pyfunction]
#[pyo3(signature = (problem, grid_n = 100))]
fn audit<'py>(py: Python<'py>, problem: &PyProblem, grid_n: usize) -> PyResult<Bound<'py, PyAny>> {
    let b = compute_bounds(&problem.inner, &grid(&problem.inner, grid_n)?).map_err(py_err)?;
    let report = core_audit(&problem.inner, &Lattice::for_bounds(&b));
    let out = to_py(py, &report)?;
    out.set_item("hypotheses_ok", report.hypotheses_ok())?;
    out.set_item("radius", b.radius)?;
    Ok(out)
}

fn parse_sign(sign: &str) -> PyResult<Sign> {
    match sign {
        "plus" | "+" => Ok(Sign::Plus),
        "minus" | "-" => Ok(Sign::Minus),
        _ => Err(PyValueError::new_err(format!("sign must be 'plus' or 'minus', got {sign:?}"))),
    }
}

/// ε-shifted family and its extrapolated limit.
#[pyfunction]
#[pyo3(signature = (problem, sign = "plus", grid_n = 100, eps0 = 0.1, rho = 0.5, count = 6, tol = 1e-10, warm_start = true))]
#[allow(clippy::too_many_arguments)]
fn extremal<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    sign: &str,
    grid_n: usize,
    eps0: f64,
    rho: f64,
    count: usize,
    tol: f64,
    warm_start: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let sched = EpsilonSchedule::new(eps0, rho, count).map_err(py_err)?;
    let opts = FamilyOptions {
        warm_start,
        ..Default::default()
    };
    let g = grid(&problem.inner, grid_n)?;
    let fam = solve_family(&problem.inner, g, &sched, parse_sign(sign)?, &solver(tol, 500, 1.0), &opts).map_err(py_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("t", g.nodes().collect::<Vec<_>>())?;
    out.set_item("eps", sched.epsilons())?;
    out.set_item("members", fam.solutions().map(|x| x.values().to_vec()).collect::<Vec<_>>())?;
    out.set_item("estimate", fam.extremal_estimate.values().to_vec())?;
    out.set_item("ordering_ok", fam.ordering_ok)?;
    out.set_item("worst_ordering_violation", fam.worst_ordering_violation)?;
    out.set_item("negative_kernel", fam.negative_kernel())?;
    Ok(out.into_any())
}

fn on_unit_grid(values: Vec<f64>) -> PyResult<GridFunction> {
    if values.len() < 3 {
        return Err(PyValueError::new_err("need at least 3 nodes"));
    }
    let g = Grid::new(1.0, values.len() - 1).map_err(py_err)?;
    GridFunction::new(g, values).map_err(py_err)
}

/// `lower − slack ≤ x ≤ upper + slack` nodewise; either bound may be None.
#[pyfunction]
#[pyo3(signature = (x, upper = None, lower = None, slack = 0.0))]
fn sandwich<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    upper: Option<Vec<f64>>,
    lower: Option<Vec<f64>>,
    slack: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let x = on_unit_grid(x)?;
    let upper = upper.map(on_unit_grid).transpose()?;
    let lower = lower.map(on_unit_grid).transpose()?;
    let v = sandwich_check(&x, upper.as_ref(), lower.as_ref(), slack).map_err(py_err)?;
    to_py(py, &v)
}

/// Randomized falsification harness for the comparison principle.
#[pyfunction]
#[pyo3(signature = (seed = 0, problems = 200, grid_n = 64))]
fn comparison_harness<'py>(py: Python<'py>, seed: u64, problems: usize, grid_n: usize) -> PyResult<Bound<'py, PyAny>> {
    let report = core_harness(&HarnessConfig {
        seed,
        problems,
        grid_n,
        ..Default::default()
    })
    .map_err(py_err)?;
    let out = to_py(py, &report)?;
    out.set_item("passed", report.passed())?;
    Ok(out)
}

/// Observed trapezoid order for a function given as forcing JSON; None
/// when every error is at rounding level.
#[pyfunction]
#[pyo3(signature = (function, lo, hi, panels, exact = None))]
fn convergence_order(function: &str, lo: f64, hi: f64, panels: Vec<usize>, exact: Option<f64>) -> PyResult<Option<f64>> {
    let g: Forcing = serde_json::from_str(function).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let oracle = exact.map_or(Oracle::default(), Oracle::Exact);
    let study = core_order(&g, (lo, hi), &panels, oracle).map_err(py_err)?;
    Ok(match study.order {
        Order::Observed(k) => Some(k),
        Order::Exact => None,
    })
}

/// The built-in manufactured-solution corpus as `(id, problem)` pairs.
#[pyfunction]
fn corpus() -> PyResult<Vec<(String, PyProblem)>> {
    Ok(manufactured_corpus()
        .map_err(py_err)?
        .into_iter()
        .map(|e| (e.id.to_string(), PyProblem { inner: e.problem }))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (grid_n = 400, tol = 1e-10, max_error = 1e-6))]
fn run_corpus<'py>(py: Python<'py>, grid_n: usize, tol: f64, max_error: f64) -> PyResult<Bound<'py, PyAny>> {
    let entries = manufactured_corpus().map_err(py_err)?;
    let rows = core_run_corpus(&entries, grid_n, &solver(tol, 500, 1.0), max_error).map_err(py_err)?;
    to_py(py, &rows)
}

#[pymodule]
fn urysohn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(extremal, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(comparison_harness, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_order, m)?)?;
    m.add_function(wrap_pyfunction!(corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_corpus, m)?)?;
    Ok(())
}
