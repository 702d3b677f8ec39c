//! Run configuration: a versioned TOML document parsed with unknown keys
//! rejected and every field validated, with diagnostics that carry the
//! line of the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use urysohn_core::extremal::{EpsilonSchedule, Extrapolation, FamilyOptions, Sign};
use urysohn_core::{InitialGuess, Problem, SolverConfig};

/// Value required in the `schema` key.
pub const SCHEMA: &str = "urysohn-run/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Audit,
    Extremal,
    Lemma,
    Corpus,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Audit => "audit",
            Mode::Extremal => "extremal",
            Mode::Lemma => "lemma",
            Mode::Corpus => "corpus",
        }
    }

    fn needs_problem(self) -> bool {
        matches!(self, Mode::Solve | Mode::Audit | Mode::Extremal)
    }

    fn default_grid_n(self) -> usize {
        match self {
            Mode::Corpus => 400,
            _ => 100,
        }
    }
}

/// Which ε-families the extremal mode computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SignChoice {
    Plus,
    Minus,
    Both,
}

impl SignChoice {
    pub fn signs(self) -> &'static [Sign] {
        match self {
            SignChoice::Plus => &[Sign::Plus],
            SignChoice::Minus => &[Sign::Minus],
            SignChoice::Both => &[Sign::Plus, Sign::Minus],
        }
    }
}

/// `initial = "forcing"` or `initial = { constant = 0.5 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSetting {
    Forcing,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_halvings: usize,
    pub initial: InitialSetting,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
            max_halvings: d.max_halvings,
            initial: InitialSetting::Forcing,
        }
    }
}

impl SolverSettings {
    pub fn to_core(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            max_halvings: self.max_halvings,
            initial: match self.initial {
                InitialSetting::Forcing => InitialGuess::Forcing,
                InitialSetting::Constant(c) => InitialGuess::Constant(c),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtremalSettings {
    pub eps0: f64,
    pub rho: f64,
    pub count: usize,
    pub sign: SignChoice,
    pub warm_start: bool,
    pub extrapolation: Extrapolation,
    pub ordering_slack: f64,
}

impl Default for ExtremalSettings {
    fn default() -> Self {
        let s = EpsilonSchedule::default();
        let o = FamilyOptions::default();
        ExtremalSettings {
            eps0: s.eps0(),
            rho: s.rho(),
            count: s.count(),
            sign: SignChoice::Both,
            warm_start: o.warm_start,
            extrapolation: o.extrapolation,
            ordering_slack: o.ordering_slack,
        }
    }
}

impl ExtremalSettings {
    /// Valid once the config has passed validation.
    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule::new(self.eps0, self.rho, self.count).expect("validated schedule")
    }

    pub fn options(&self) -> FamilyOptions {
        FamilyOptions {
            ordering_slack: self.ordering_slack,
            warm_start: self.warm_start,
            extrapolation: self.extrapolation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSettings {
    pub problems: usize,
    pub grid_n: usize,
    pub shrink: f64,
    pub eps: f64,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        LemmaSettings {
            problems: 200,
            grid_n: 64,
            shrink: 0.05,
            eps: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub max_error: f64,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        CorpusSettings { max_error: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub mode: Mode,
    /// Panels of the solve grid; defaults to 400 in corpus mode, else 100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub extremal: ExtremalSettings,
    #[serde(default)]
    pub lemma: LemmaSettings,
    #[serde(default)]
    pub corpus: CorpusSettings,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Minimal config for `mode`, with defaults everywhere else.
    pub fn new(mode: Mode, problem: Option<Problem>) -> Self {
        RunConfig {
            schema: SCHEMA.to_string(),
            mode,
            grid_n: None,
            seed: 0,
            output_dir: default_output_dir(),
            problem,
            solver: SolverSettings::default(),
            extremal: ExtremalSettings::default(),
            lemma: LemmaSettings::default(),
            corpus: CorpusSettings::default(),
        }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n.unwrap_or(self.mode.default_grid_n())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(n) = o.grid_n {
            self.grid_n = Some(n);
        }
        if let Some(t) = o.tol {
            self.solver.tol = t;
        }
        if let Some(e) = o.eps0 {
            self.extremal.eps0 = e;
        }
        if let Some(r) = o.rho {
            self.extremal.rho = r;
        }
        if let Some(c) = o.count {
            self.extremal.count = c;
        }
        if let Some(s) = o.sign {
            self.extremal.sign = s;
        }
        if let Some(d) = &o.out {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    /// Field-level checks; `text` is used only to locate keys.
    fn validate(&self, text: &str, o: &Overrides) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, flag: Option<&str>, overridden: bool, message: String| {
            if !ok {
                errors.push(FieldError {
                    field: if overridden { flag.unwrap_or(field).to_string() } else { field.to_string() },
                    line: if overridden { None } else { locate(text, field) },
                    message,
                });
            }
        };
        check(
            self.schema == SCHEMA,
            "schema",
            None,
            false,
            format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema),
        );
        check(
            self.grid_n() >= 2,
            "grid_n",
            Some("--grid-n"),
            o.grid_n.is_some(),
            format!("must be ≥ 2, got {}", self.grid_n()),
        );
        check(
            !self.mode.needs_problem() || self.problem.is_some(),
            "problem",
            None,
            false,
            format!("mode {} requires a [problem] table", self.mode.label()),
        );
        let s = &self.solver;
        check(
            s.tol.is_finite() && s.tol > 0.0,
            "solver.tol",
            Some("--tol"),
            o.tol.is_some(),
            format!("must be positive, got {}", s.tol),
        );
        check(s.max_iter >= 1, "solver.max_iter", None, false, "must be ≥ 1".into());
        check(
            s.damping > 0.0 && s.damping <= 1.0,
            "solver.damping",
            None,
            false,
            format!("must lie in (0, 1], got {}", s.damping),
        );
        if let InitialSetting::Constant(c) = s.initial {
            check(
                c.is_finite() && c > 0.0,
                "solver.initial",
                None,
                false,
                format!("constant initial guess must be positive, got {c}"),
            );
        }
        let e = &self.extremal;
        check(
            e.eps0.is_finite() && e.eps0 > 0.0,
            "extremal.eps0",
            Some("--eps0"),
            o.eps0.is_some(),
            format!("must be positive, got {}", e.eps0),
        );
        check(
            e.rho > 0.0 && e.rho < 1.0,
            "extremal.rho",
            Some("--rho"),
            o.rho.is_some(),
            format!("decay ratio must be in (0, 1), got {}", e.rho),
        );
        check(
            e.count >= 2,
            "extremal.count",
            Some("--count"),
            o.count.is_some(),
            format!("must be ≥ 2, got {}", e.count),
        );
        check(
            e.ordering_slack.is_finite() && e.ordering_slack >= 0.0,
            "extremal.ordering_slack",
            None,
            false,
            format!("must be nonnegative, got {}", e.ordering_slack),
        );
        let l = &self.lemma;
        check(l.problems >= 1, "lemma.problems", None, false, "must be ≥ 1".into());
        check(l.grid_n >= 2, "lemma.grid_n", None, false, format!("must be ≥ 2, got {}", l.grid_n));
        check(
            l.shrink > 0.0 && l.shrink < 1.0,
            "lemma.shrink",
            None,
            false,
            format!("must lie in (0, 1), got {}", l.shrink),
        );
        check(
            l.eps.is_finite() && l.eps > 0.0,
            "lemma.eps",
            None,
            false,
            format!("must be positive, got {}", l.eps),
        );
        check(
            self.corpus.max_error.is_finite() && self.corpus.max_error > 0.0,
            "corpus.max_error",
            None,
            false,
            format!("must be positive, got {}", self.corpus.max_error),
        );
        errors
    }
}

/// Command-line values that replace the corresponding config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub eps0: Option<f64>,
    pub rho: Option<f64>,
    pub count: Option<usize>,
    pub sign: Option<SignChoice>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted key path, or the flag that supplied the value.
    pub field: String,
    /// 1-based line of the key in the config text, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: Option<PathBuf>,
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let origin = self.source.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default();
        for (k, e) in self.errors.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{origin}{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with(text, &Overrides::default())
}

pub fn parse_with(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        source: None,
        errors: vec![syntax_error(text, &e)],
    })?;
    cfg.apply(overrides);
    let errors = cfg.validate(text, overrides);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { source: None, errors })
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source: Some(path.to_path_buf()),
        errors: vec![FieldError {
            field: "--config".into(),
            line: None,
            message: e.to_string(),
        }],
    })?;
    parse_with(&text, overrides).map_err(|mut e| {
        e.source = Some(path.to_path_buf());
        e
    })
}

fn syntax_error(text: &str, e: &toml::de::Error) -> FieldError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let field = line
        .and_then(|l| text.lines().nth(l - 1))
        .and_then(|l| l.split_once('='))
        .map(|(k, _)| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "config".into());
    FieldError {
        field,
        line,
        message: e.message().trim().to_string(),
    }
}

/// Line of `dotted` (for example `extremal.rho`) in the config text, found
/// either as a key under its table header or as a dotted key.
fn locate(text: &str, dotted: &str) -> Option<usize> {
    let mut table = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[') {
            table = h.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            continue;
        }
        let Some((key, _)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim().trim_matches('"');
        let full = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
        if full == dotted {
            return Some(k + 1);
        }
    }
    // a table with no direct key of that name, e.g. `problem`
    text.lines().position(|l| l.trim() == format!("[{dotted}]")).map(|k| k + 1)
}
