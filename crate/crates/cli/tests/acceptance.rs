//! Acceptance suite: runs each criterion at its stated tolerance and prints
//! one pass/fail line per criterion. Runs as a plain binary so the lines
//! always reach the test log.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urysohn_core::catalog::{manufactured_corpus, random_monotone_problem, refinement_order, run_corpus, CorpusEntry};
use urysohn_core::comparison::{comparison_harness, HarnessConfig};
use urysohn_core::extremal::{sandwich_check, solve_family, FamilyOptions};
use urysohn_core::hypotheses::{audit, compute_bounds};
use urysohn_core::operator::picard_solve;
use urysohn_core::quadrature::{convergence_order, Oracle, Order};
use urysohn_core::{EpsilonSchedule, Forcing, Grid, Kernel, Lattice, Problem, Sign, SolverConfig};

type Verdict = Result<String, String>;

fn corpus() -> Vec<CorpusEntry> {
    manufactured_corpus().expect("corpus builds")
}

fn solver(tol: f64) -> SolverConfig {
    SolverConfig {
        tol,
        ..Default::default()
    }
}

fn manufactured_recovery() -> Verdict {
    let corpus = corpus();
    if corpus.len() < 8 || corpus.iter().all(|e| e.id != "unit-affine") {
        return Err("corpus lacks the required problems".into());
    }
    let start = Instant::now();
    let rows = run_corpus(&corpus, 400, &solver(1e-10), 1e-6).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let worst = rows.iter().max_by(|a, b| a.sup_error.total_cmp(&b.sup_error)).unwrap();
    let detail = format!(
        "{} problems, max sup-error {:.2e} ({}), {elapsed:.2} s",
        rows.len(),
        worst.sup_error,
        worst.id
    );
    if let Some(bad) = rows.iter().find(|r| !r.passed) {
        return Err(format!("{detail}; {} ended {:?} with error {:.2e}", bad.id, bad.status, bad.sup_error));
    }
    if elapsed > 10.0 {
        return Err(format!("{detail}; exceeds 10 s"));
    }
    Ok(detail)
}

/// Solves `p` on `n` panels and counts nodes outside `0 < x ≤ r + 10·tol`;
/// `None` when the audit fails or the solve does not converge.
fn ball_violations(p: &Problem, n: usize, tol: f64) -> Result<Option<usize>, String> {
    let grid = Grid::new(p.horizon(), n).map_err(|e| e.to_string())?;
    let bounds = compute_bounds(p, &grid).map_err(|e| e.to_string())?;
    if !audit(p, &Lattice::for_bounds(&bounds)).hypotheses_ok() {
        return Ok(None);
    }
    let r = picard_solve(p, grid, &solver(tol)).map_err(|e| e.to_string())?;
    if !r.converged() {
        return Ok(None);
    }
    let limit = bounds.radius + 10.0 * tol;
    Ok(Some(r.x.values().iter().filter(|&&v| !(v > 0.0 && v <= limit)).count()))
}

fn invariant_ball() -> Verdict {
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut problems: Vec<Problem> = corpus().into_iter().map(|e| e.problem).collect();
    for _ in 0..100 {
        problems.push(random_monotone_problem(&mut rng).map_err(|e| e.to_string())?);
    }
    let (mut checked, mut skipped, mut violations) = (0, 0, 0);
    for p in &problems {
        match ball_violations(p, 200, tol)? {
            Some(v) => {
                checked += 1;
                violations += v;
            }
            None => skipped += 1,
        }
    }
    let detail = format!("{checked} audited-ok solutions checked ({skipped} not audited-ok), {violations} violating nodes");
    if violations == 0 && checked >= 8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quadrature_order() -> Verdict {
    let cases = [
        ("s^2", Forcing::Polynomial { coeffs: vec![0.0, 0.0, 1.0] }, 1.0 / 3.0),
        ("e^s", Forcing::Exp { scale: 1.0, rate: 1.0 }, std::f64::consts::E - 1.0),
        ("1/(1+s)", Forcing::InverseAffine { c: 1.0, b0: 1.0, b1: 1.0 }, std::f64::consts::LN_2),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, g, exact) in cases {
        let study = convergence_order(&g, (0.0, 1.0), &[10, 20, 40, 80, 160], Oracle::Exact(exact)).map_err(|e| e.to_string())?;
        match study.order {
            Order::Observed(k) => {
                ok &= (k - 2.0).abs() <= 0.2;
                parts.push(format!("{name} {k:.3}"));
            }
            Order::Exact => {
                ok = false;
                parts.push(format!("{name} exact"));
            }
        }
    }
    let detail = format!("orders: {}", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn refinement() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for e in corpus() {
        let study = refinement_order(&e.problem, &[50, 100, 200, 400], &solver(1e-13)).map_err(|err| err.to_string())?;
        match study.order {
            Order::Exact => parts.push(format!("{} exact", e.id)),
            Order::Observed(k) => {
                ok &= k >= 1.8;
                parts.push(format!("{} {k:.3}", e.id));
            }
        }
    }
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn comparison() -> Verdict {
    let start = Instant::now();
    let report = comparison_harness(&HarnessConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} problems, {} monotone, {} certified pairs, {} ordered, {} counterexamples, {elapsed:.2} s",
        report.problems,
        report.monotone_problems,
        report.certified_pairs,
        report.orderings_verified,
        report.counterexamples.len()
    );
    if report.passed() && report.certified_pairs > 0 && report.problems == 200 && elapsed <= 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const FAMILY_GRID: usize = 200;

fn epsilon_monotonicity() -> Verdict {
    let sched = EpsilonSchedule::new(0.1, 0.5, 6).unwrap();
    let opts = FamilyOptions::default();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for e in corpus() {
        let grid = Grid::new(e.problem.horizon(), FAMILY_GRID).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let fam = solve_family(&e.problem, grid, &sched, sign, &solver(1e-10), &opts).map_err(|err| format!("{}: {err}", e.id))?;
            worst = worst.max(fam.worst_ordering_violation);
            if !fam.ordering_ok {
                failures.push(format!("{} {sign:?}", e.id));
            }
        }
    }
    let detail = format!("16 families, worst violation {worst:.2e} (slack 1e-8)");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failures.join(", ")))
    }
}

fn sandwich() -> Verdict {
    let tol = 1e-10;
    let sched = EpsilonSchedule::new(0.1, 0.5, 6).unwrap();
    let slack = 10.0 * tol + sched.last().powi(2);
    let opts = FamilyOptions::default();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for e in corpus() {
        let grid = Grid::new(e.problem.horizon(), FAMILY_GRID).unwrap();
        let cfg = solver(tol);
        let x = picard_solve(&e.problem, grid, &cfg).map_err(|err| err.to_string())?;
        let q = solve_family(&e.problem, grid, &sched, Sign::Plus, &cfg, &opts).map_err(|err| err.to_string())?;
        let n = solve_family(&e.problem, grid, &sched, Sign::Minus, &cfg, &opts).map_err(|err| err.to_string())?;
        let v = sandwich_check(&x.x, Some(&q.extremal_estimate), Some(&n.extremal_estimate), slack).map_err(|err| err.to_string())?;
        worst = worst.max(v.worst_excess);
        if !v.holds {
            failures.push(format!("{} node {}", e.id, v.worst_node));
        }
    }
    let detail = format!("slack {slack:.3e}, worst excess over slack {worst:.2e}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failures.join(", ")))
    }
}

fn trivial_exactness() -> Verdict {
    let forcings = [
        (1.0, Forcing::constant(1.0)),
        (2.0, Forcing::Polynomial { coeffs: vec![0.5, 1.0, 0.25] }),
        (
            0.7,
            Forcing::Sine {
                offset: 2.0,
                amplitude: 1.0,
                frequency: 5.0,
            },
        ),
        (3.0, Forcing::Exp { scale: 0.5, rate: -1.0 }),
    ];
    let mut worst_res: f64 = 0.0;
    for (horizon, a) in forcings {
        let p = Problem::new(horizon, a.clone(), Kernel::Zero, Kernel::Zero).map_err(|e| e.to_string())?;
        for n in [2, 10, 400] {
            let grid = Grid::new(horizon, n).unwrap();
            let r = picard_solve(&p, grid, &SolverConfig::default()).map_err(|e| e.to_string())?;
            worst_res = worst_res.max(r.residual());
            let exact = grid.nodes().zip(r.x.values()).all(|(t, &x)| x == a.value(t));
            if r.iterations > 1 || r.residual() > 1e-12 || !exact {
                return Err(format!(
                    "T = {horizon}, n = {n}: {} iterations, residual {:e}, x == a: {exact}",
                    r.iterations,
                    r.residual()
                ));
            }
        }
    }
    Ok(format!("12 zero-kernel solves in 1 iteration, max residual {worst_res:e}"))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("corpus.toml");
    fs::write(&config, "schema = \"urysohn-run/1\"\nmode = \"corpus\"\ngrid_n = 400\n").map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_urysohn"))
            .arg("--config")
            .arg(&config)
            .args(["--seed", "42", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("corpus run {run} exited {:?}", status.status.code()));
        }
        outputs.push(fs::read(out.join("corpus.csv")).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("two corpus runs, identical {}-byte CSVs", outputs[0].len()))
    } else {
        Err("corpus CSVs differ".into())
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("manufactured-solution recovery", manufactured_recovery),
        ("invariant ball", invariant_ball),
        ("quadrature order", quadrature_order),
        ("grid-refinement order", refinement),
        ("comparison harness", comparison),
        ("epsilon monotonicity", epsilon_monotonicity),
        ("sandwich", sandwich),
        ("trivial exactness", trivial_exactness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
