//! Mode drivers. Each writes its artifacts under the output directory and
//! returns the verdict together with one message per failed check.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use urysohn_core::catalog::{manufactured_corpus, run_corpus, CorpusOutcome};
use urysohn_core::comparison::{comparison_harness, HarnessConfig, HarnessReport};
use urysohn_core::extremal::{sandwich_check, solve_family, EpsilonFamily, SandwichVerdict, Sign};
use urysohn_core::hypotheses::{audit, compute_bounds, AuditReport, Bounds, Lattice};
use urysohn_core::operator::picard_solve;
use urysohn_core::{Grid, GridFunction, Problem, SolveResult, SolveStatus};

use crate::config::{Mode, RunConfig, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Solver(#[from] urysohn_core::Error),
}

impl CliError {
    /// 2 for configuration problems (including an unwritable output
    /// directory), 1 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub passed: bool,
    /// Human-readable description of each failed check.
    pub failures: Vec<String>,
    pub summary: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

/// Full-precision float for CSV cells (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a `t` column followed by the given columns.
fn grid_csv(grid: Grid, columns: &[(String, &GridFunction)]) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..grid.len() {
        out.push_str(&fmt_f64(grid.node(i)));
        for (_, g) in columns {
            out.push(',');
            out.push_str(&fmt_f64(g.values()[i]));
        }
        out.push('\n');
    }
    out
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut out = Outputs::new(&cfg.output_dir)?;
    let (failures, summary) = match cfg.mode {
        Mode::Solve => run_solve(cfg, &mut out)?,
        Mode::Audit => run_audit(cfg, &mut out)?,
        Mode::Extremal => run_extremal(cfg, &mut out)?,
        Mode::Lemma => run_lemma(cfg, &mut out)?,
        Mode::Corpus => run_corpus_mode(cfg, &mut out)?,
    };
    Ok(RunOutcome {
        passed: failures.is_empty(),
        failures,
        summary,
        artifacts: out.written,
    })
}

type Verdicts = (Vec<String>, Vec<String>);

fn problem(cfg: &RunConfig) -> &Problem {
    cfg.problem.as_ref().expect("validated config has a problem")
}

#[derive(Serialize)]
struct AuditSummary {
    hypotheses_ok: bool,
    caratheodory_ok: bool,
    continuity_ok: bool,
    nonincreasing_in_t_ok: bool,
    nondecreasing_in_x_ok: bool,
    forcing_strictly_positive: bool,
    majorant_violations: usize,
    continuity_violations: usize,
}

impl From<&AuditReport> for AuditSummary {
    fn from(r: &AuditReport) -> Self {
        AuditSummary {
            hypotheses_ok: r.hypotheses_ok(),
            caratheodory_ok: r.caratheodory_ok,
            continuity_ok: r.continuity_ok,
            nonincreasing_in_t_ok: r.nonincreasing_in_t_ok,
            nondecreasing_in_x_ok: r.nondecreasing_in_x_ok,
            forcing_strictly_positive: r.forcing_strictly_positive,
            majorant_violations: r.sample_counts.majorant_violations,
            continuity_violations: r.sample_counts.continuity_violations,
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    schema: &'static str,
    mode: &'static str,
    grid_n: usize,
    status: SolveStatus,
    iterations: usize,
    residual: f64,
    residual_history: &'a [f64],
    damping: f64,
    halvings: usize,
    bounds_respected: bool,
    bounds: &'a Bounds,
    audit: AuditSummary,
}

fn status_failure(what: &str, r: &SolveResult) -> Option<String> {
    (!r.converged()).then(|| {
        format!(
            "{what}: solve ended {:?} after {} iterations with residual {:e}",
            r.status,
            r.iterations,
            r.residual()
        )
    })
}

fn run_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<Verdicts, CliError> {
    let p = problem(cfg);
    let grid = Grid::new(p.horizon(), cfg.grid_n())?;
    let result = picard_solve(p, grid, &cfg.solver.to_core())?;
    let report = audit(p, &Lattice::for_bounds(&result.bounds));
    out.write("solution.csv", &grid_csv(grid, &[("x".into(), &result.x)]))?;
    out.json(
        "report.json",
        &SolveReport {
            schema: SCHEMA,
            mode: "solve",
            grid_n: cfg.grid_n(),
            status: result.status,
            iterations: result.iterations,
            residual: result.residual(),
            residual_history: &result.residual_history,
            damping: result.damping,
            halvings: result.halvings,
            bounds_respected: result.bounds_respected,
            bounds: &result.bounds,
            audit: (&report).into(),
        },
    )?;
    let failures = status_failure("solve", &result).into_iter().collect();
    let summary = vec![format!(
        "solve: {:?} in {} iterations, residual {:e}, r = {}",
        result.status,
        result.iterations,
        result.residual(),
        result.bounds.radius
    )];
    Ok((failures, summary))
}

#[derive(Serialize)]
struct AuditFile<'a> {
    schema: &'static str,
    mode: &'static str,
    grid_n: usize,
    bounds: &'a Bounds,
    hypotheses_ok: bool,
    report: &'a AuditReport,
}

fn run_audit(cfg: &RunConfig, out: &mut Outputs) -> Result<Verdicts, CliError> {
    let p = problem(cfg);
    let grid = Grid::new(p.horizon(), cfg.grid_n())?;
    let bounds = compute_bounds(p, &grid)?;
    let report = audit(p, &Lattice::for_bounds(&bounds));
    out.json(
        "audit.json",
        &AuditFile {
            schema: SCHEMA,
            mode: "audit",
            grid_n: cfg.grid_n(),
            bounds: &bounds,
            hypotheses_ok: report.hypotheses_ok(),
            report: &report,
        },
    )?;
    let mut failures = Vec::new();
    if !report.caratheodory_ok {
        let worst = report
            .majorant_violations
            .iter()
            .max_by(|a, b| (a.f - a.m).total_cmp(&(b.f - b.m)))
            .expect("violations recorded");
        failures.push(format!(
            "majorant: {} violations; worst {} at (t, s, x) = ({}, {}, {}): f = {} > m = {}",
            report.sample_counts.majorant_violations, worst.kernel, worst.t, worst.s, worst.x, worst.f, worst.m
        ));
    }
    if !report.continuity_ok {
        let v = &report.continuity_violations[0];
        failures.push(format!(
            "continuity: {} violations; first {} at (t, s, x) = ({}, {}, {}) jumps {:e}",
            report.sample_counts.continuity_violations, v.kernel, v.t, v.s, v.x, v.jump
        ));
    }
    if !bounds.cap_converged {
        failures.push(format!(
            "radius: cap iteration stopped after {} passes with cap {:?} vs r = {}",
            bounds.cap_passes, bounds.x_cap, bounds.radius
        ));
    }
    let summary = vec![
        format!("audit: r = {}, hypotheses_ok = {}", bounds.radius, report.hypotheses_ok()),
        format!(
            "audit: nonincreasing in t = {}, nondecreasing in x = {}",
            report.nonincreasing_in_t_ok, report.nondecreasing_in_x_ok
        ),
    ];
    Ok((failures, summary))
}

#[derive(Serialize)]
struct MemberRow {
    eps: f64,
    status: SolveStatus,
    iterations: usize,
    residual: f64,
    negative_kernel: bool,
    clamp_active: bool,
}

#[derive(Serialize)]
struct FamilyRow {
    sign: Sign,
    members: Vec<MemberRow>,
    ordering_ok: bool,
    worst_ordering_violation: f64,
    worst_ordering_member: usize,
    worst_ordering_node: usize,
    negative_kernel: bool,
}

impl From<&EpsilonFamily> for FamilyRow {
    fn from(f: &EpsilonFamily) -> Self {
        FamilyRow {
            sign: f.sign,
            members: f
                .members
                .iter()
                .map(|m| MemberRow {
                    eps: m.eps,
                    status: m.result.status,
                    iterations: m.result.iterations,
                    residual: m.result.residual(),
                    negative_kernel: m.negative_kernel,
                    clamp_active: m.clamp_active,
                })
                .collect(),
            ordering_ok: f.ordering_ok,
            worst_ordering_violation: f.worst_ordering_violation,
            worst_ordering_member: f.worst_ordering_member,
            worst_ordering_node: f.worst_ordering_node,
            negative_kernel: f.negative_kernel(),
        }
    }
}

#[derive(Serialize)]
struct ExtremalReport {
    schema: &'static str,
    mode: &'static str,
    grid_n: usize,
    epsilons: Vec<f64>,
    extrapolation: urysohn_core::extremal::Extrapolation,
    solution_status: SolveStatus,
    families: Vec<FamilyRow>,
    sandwich: SandwichVerdict,
}

fn sign_label(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

fn run_extremal(cfg: &RunConfig, out: &mut Outputs) -> Result<Verdicts, CliError> {
    let p = problem(cfg);
    let grid = Grid::new(p.horizon(), cfg.grid_n())?;
    let solver = cfg.solver.to_core();
    let schedule = cfg.extremal.schedule();
    let opts = cfg.extremal.options();
    let x = picard_solve(p, grid, &solver)?;
    let mut failures: Vec<String> = status_failure("solution", &x).into_iter().collect();

    let families = cfg
        .extremal
        .sign
        .signs()
        .iter()
        .map(|&s| solve_family(p, grid, &schedule, s, &solver, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let upper = families.iter().find(|f| f.sign == Sign::Plus).map(|f| &f.extremal_estimate);
    let lower = families.iter().find(|f| f.sign == Sign::Minus).map(|f| &f.extremal_estimate);
    let slack = 10.0 * solver.tol + schedule.last().powi(2);
    let sandwich = sandwich_check(&x.x, upper, lower, slack)?;

    let mut columns: Vec<(String, &GridFunction)> = vec![("x".into(), &x.x)];
    for f in &families {
        let label = sign_label(f.sign);
        for (k, m) in f.members.iter().enumerate() {
            columns.push((format!("x_eps_{k}_{label}"), &m.result.x));
        }
        let name = if f.sign == Sign::Plus { "q" } else { "n" };
        columns.push((name.into(), &f.extremal_estimate));
    }
    out.write("family.csv", &grid_csv(grid, &columns))?;

    let mut summary = Vec::new();
    for f in &families {
        let label = sign_label(f.sign);
        if !f.ordering_ok {
            let k = f.worst_ordering_member;
            failures.push(format!(
                "ordering ({label}): members eps = {} and eps = {} cross by {:e} at node {} (t = {})",
                f.members[k].eps,
                f.members[k + 1].eps,
                f.worst_ordering_violation,
                f.worst_ordering_node,
                grid.node(f.worst_ordering_node)
            ));
        }
        if f.negative_kernel() {
            summary.push(format!("extremal ({label}): shifted kernels clamped at zero for some eps"));
        }
    }
    if !sandwich.holds {
        let side = if sandwich.upper_ok { "lower" } else { "upper" };
        failures.push(format!(
            "sandwich: {side} bound exceeded by {:e} at node {} (t = {}), slack {:e}",
            sandwich.worst_excess,
            sandwich.worst_node,
            grid.node(sandwich.worst_node),
            slack
        ));
    }
    summary.push(format!(
        "extremal: {} families over {} eps values, sandwich holds = {}",
        families.len(),
        schedule.count(),
        sandwich.holds
    ));
    out.json(
        "report.json",
        &ExtremalReport {
            schema: SCHEMA,
            mode: "extremal",
            grid_n: cfg.grid_n(),
            epsilons: schedule.epsilons(),
            extrapolation: opts.extrapolation,
            solution_status: x.status,
            families: families.iter().map(FamilyRow::from).collect(),
            sandwich,
        },
    )?;
    Ok((failures, summary))
}

#[derive(Serialize)]
struct LemmaFile<'a> {
    schema: &'static str,
    mode: &'static str,
    passed: bool,
    harness: &'a HarnessReport,
}

fn run_lemma(cfg: &RunConfig, out: &mut Outputs) -> Result<Verdicts, CliError> {
    let l = &cfg.lemma;
    let report = comparison_harness(&HarnessConfig {
        seed: cfg.seed,
        problems: l.problems,
        grid_n: l.grid_n,
        shrink: l.shrink,
        eps: l.eps,
        solver: cfg.solver.to_core(),
    })?;
    out.json(
        "lemma.json",
        &LemmaFile {
            schema: SCHEMA,
            mode: "lemma",
            passed: report.passed(),
            harness: &report,
        },
    )?;
    let failures = report
        .counterexamples
        .iter()
        .map(|c| {
            format!(
                "comparison: problem {} crosses at node {} (t = {}), gap {:e}",
                c.problem, c.node, c.t, c.gap
            )
        })
        .collect();
    let summary = vec![format!(
        "lemma: seed {}, {} problems, {} certified pairs, {} ordered, {} counterexamples",
        report.seed,
        report.problems,
        report.certified_pairs,
        report.orderings_verified,
        report.counterexamples.len()
    )];
    Ok((failures, summary))
}

#[derive(Serialize)]
struct CorpusFile<'a> {
    schema: &'static str,
    mode: &'static str,
    grid_n: usize,
    max_error: f64,
    passed: bool,
    rows: &'a [CorpusOutcome],
}

fn run_corpus_mode(cfg: &RunConfig, out: &mut Outputs) -> Result<Verdicts, CliError> {
    let corpus = manufactured_corpus()?;
    let max_error = cfg.corpus.max_error;
    let mut rows = run_corpus(&corpus, cfg.grid_n(), &cfg.solver.to_core(), max_error)?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let mut csv = String::from("id,grid_n,status,iterations,residual,sup_error,passed\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{:?},{},{},{},{}",
            r.id,
            r.grid_n,
            r.status,
            r.iterations,
            fmt_f64(r.residual),
            fmt_f64(r.sup_error),
            r.passed
        )
        .expect("string write");
    }
    out.write("corpus.csv", &csv)?;
    let passed = rows.iter().all(|r| r.passed);
    out.json(
        "corpus.json",
        &CorpusFile {
            schema: SCHEMA,
            mode: "corpus",
            grid_n: cfg.grid_n(),
            max_error,
            passed,
            rows: &rows,
        },
    )?;
    let failures = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| {
            format!(
                "corpus: {} ended {:?} with sup-error {:e} (limit {:e})",
                r.id, r.status, r.sup_error, max_error
            )
        })
        .collect();
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{:<16} {:>10?} {:>4} it  sup-error {:.3e}  {}",
                r.id,
                r.status,
                r.iterations,
                r.sup_error,
                if r.passed { "pass" } else { "FAIL" }
            )
        })
        .collect();
    Ok((failures, summary))
}
