//! Problem definitions for `x(t) = a(t) + ∫₀ᵗ f₁(t,s,x(s))ds · ∫₀ᵗ f₂(t,s,x(s))ds`.
//!
//! Forcing terms, kernels and majorants are drawn from closed, parameterized
//! families so that the domination and monotonicity hypotheses can be
//! checked against formulas instead of trusted.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniformly spaced samples used to validate the forcing term.
pub const FORCING_SAMPLES: usize = 257;

/// Smallest panel count accepted for the manufactured-solution oracle.
pub const MIN_ORACLE_PANELS: usize = 1024;

/// Relative tolerance applied to the time-domain checks.
const DOMAIN_SLACK: f64 = 1e-12;

/// Forcing term `a(t)`. Also used for any other function of one time variable
/// (manufactured solutions, quadrature test integrands).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Constant {
        c: f64,
    },
    /// `Σ coeffs[k] · t^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `scale · exp(rate · t)`
    Exp {
        scale: f64,
        rate: f64,
    },
    /// `c / (b0 + b1 · t)`
    InverseAffine {
        c: f64,
        b0: f64,
        b1: f64,
    },
    /// `offset + amplitude · sin(frequency · t)`
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    Manufactured(Box<Manufactured>),
}

/// Forcing built so that `x_star` solves the equation with kernels `f1`, `f2`:
/// `a(t) = x_star(t) − I₁(t)·I₂(t)`, where each `I_i` is a dense composite
/// trapezoid with `oracle_n` panels over `[0, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manufactured {
    pub x_star: Forcing,
    pub f1: Kernel,
    pub f2: Kernel,
    pub oracle_n: usize,
}

impl Manufactured {
    /// Oracle values of both kernel integrals at time `t`.
    pub fn oracle_integrals(&self, t: f64) -> (f64, f64) {
        if t == 0.0 {
            return (0.0, 0.0);
        }
        let n = self.oracle_n;
        let (mut s1, mut s2) = (0.0, 0.0);
        for j in 0..=n {
            let s = t * (j as f64 / n as f64);
            let x = self.x_star.value(s);
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            s1 += w * self.f1.value(t, s, x);
            s2 += w * self.f2.value(t, s, x);
        }
        (t * (s1 / n as f64), t * (s2 / n as f64))
    }
}

impl Forcing {
    pub fn constant(c: f64) -> Self {
        Forcing::Constant { c }
    }

    /// Raw evaluation; no domain or sign checks.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Forcing::Constant { c } => *c,
            Forcing::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Forcing::Exp { scale, rate } => scale * (rate * t).exp(),
            Forcing::InverseAffine { c, b0, b1 } => c / (b0 + b1 * t),
            Forcing::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * t).sin(),
            Forcing::Manufactured(m) => {
                let (i1, i2) = m.oracle_integrals(t);
                m.x_star.value(t) - i1 * i2
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("forcing parameter {name} = {v}")))
            }
        };
        match self {
            Forcing::Constant { c } => finite("c", *c),
            Forcing::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter("polynomial needs at least one coefficient".into()));
                }
                coeffs.iter().try_for_each(|c| finite("coeffs", *c))
            }
            Forcing::Exp { scale, rate } => {
                finite("scale", *scale)?;
                finite("rate", *rate)
            }
            Forcing::InverseAffine { c, b0, b1 } => {
                finite("c", *c)?;
                finite("b0", *b0)?;
                finite("b1", *b1)
            }
            Forcing::Sine {
                offset,
                amplitude,
                frequency,
            } => {
                finite("offset", *offset)?;
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)
            }
            Forcing::Manufactured(m) => {
                if m.oracle_n < MIN_ORACLE_PANELS {
                    return Err(Error::InvalidParameter(format!(
                        "oracle_n = {} must be at least {MIN_ORACLE_PANELS}",
                        m.oracle_n
                    )));
                }
                m.x_star.validate()?;
                m.f1.validate()?;
                m.f2.validate()
            }
        }
    }
}

/// State nonlinearity `g(x)` of the separable kernel families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateMap {
    /// `c0 + c1 · x`
    Linear { c0: f64, c1: f64 },
    /// `c · x / (k + x)`; bounded by `c` for every `x ≥ 0`.
    Saturating { c: f64, k: f64 },
    /// `c · √x`
    Sqrt { c: f64 },
}

impl StateMap {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            StateMap::Linear { c0, c1 } => c0 + c1 * x,
            StateMap::Saturating { c, k } => c * x / (k + x),
            StateMap::Sqrt { c } => c * x.sqrt(),
        }
    }

    /// Upper bound of `g` on `(0, x_max]`.
    fn sup(&self, x_max: f64) -> f64 {
        match self {
            StateMap::Linear { c0, c1 } => c0.max(c0 + c1 * x_max),
            StateMap::Saturating { c, .. } => *c,
            StateMap::Sqrt { c } => c * x_max.sqrt(),
        }
    }

    fn bound_depends_on_x(&self) -> bool {
        match self {
            StateMap::Linear { c1, .. } => *c1 > 0.0,
            StateMap::Saturating { .. } => false,
            StateMap::Sqrt { c } => *c > 0.0,
        }
    }

    fn nondecreasing(&self) -> bool {
        match self {
            StateMap::Linear { c1, .. } => *c1 >= 0.0,
            StateMap::Saturating { c, .. } | StateMap::Sqrt { c } => *c >= 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            StateMap::Linear { c0, c1 } => c0.is_finite() && c1.is_finite() && *c0 >= 0.0,
            StateMap::Saturating { c, k } => c.is_finite() && k.is_finite() && *c >= 0.0 && *k > 0.0,
            StateMap::Sqrt { c } => c.is_finite() && *c >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("state map {self:?}")))
        }
    }
}

/// Time weight `k(t, s)` of the separable kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    /// `c0 + ct · t + cs · s`
    Affine { c0: f64, ct: f64, cs: f64 },
    /// `scale · exp(−rate · (t − s))`
    ExpDecay { scale: f64, rate: f64 },
}

impl Weight {
    pub fn value(&self, t: f64, s: f64) -> f64 {
        match self {
            Weight::Affine { c0, ct, cs } => c0 + ct * t + cs * s,
            Weight::ExpDecay { scale, rate } => scale * (-rate * (t - s)).exp(),
        }
    }

    fn nonincreasing_in_t(&self) -> bool {
        match self {
            Weight::Affine { ct, .. } => *ct <= 0.0,
            Weight::ExpDecay { rate, .. } => *rate >= 0.0,
        }
    }

    /// Bound on `|∂²k/∂s²|` over `[0,T]²`.
    fn curvature(&self, horizon: f64) -> f64 {
        match self {
            Weight::Affine { .. } => 0.0,
            Weight::ExpDecay { scale, rate } => scale.abs() * rate * rate * (rate.abs() * horizon).exp(),
        }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        let ok = match self {
            Weight::Affine { c0, ct, cs } => {
                c0.is_finite()
                    && ct.is_finite()
                    && cs.is_finite()
                    && [(0.0, 0.0), (horizon, 0.0), (0.0, horizon), (horizon, horizon)]
                        .iter()
                        .all(|&(t, s)| self.value(t, s) >= 0.0)
            }
            Weight::ExpDecay { scale, rate } => scale.is_finite() && rate.is_finite() && *scale >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("weight {self:?} is not nonnegative on [0,T]²")))
        }
    }
}

/// Kernel catalog. Every family declares an x-free majorant in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    rename_all = "snake_case",
    deny_unknown_fields,
    from = "KernelRecord"
)]
pub enum Kernel {
    Zero,
    /// `(c0 + cs · s) · g(x)`: no dependence on `t`.
    ConstantInT { c0: f64, cs: f64, state: StateMap },
    /// `k(t, s) · g(x)`
    SeparableProduct { weight: Weight, state: StateMap },
    /// `c0 + c1 · min(x, cap)`; without a cap the majorant takes its
    /// x-bound from the caller (see `hypotheses::compute_bounds`).
    AffineState {
        c0: f64,
        c1: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// `max(base + shift, 0)`
    Perturbed { base: Box<Kernel>, shift: f64 },
}

// Serde accepts stray keys next to the tag of a unit variant, so the
// fieldless families are read through empty struct variants instead.
#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum KernelRecord {
    Zero {},
    ConstantInT {
        c0: f64,
        cs: f64,
        state: StateMap,
    },
    SeparableProduct {
        weight: Weight,
        state: StateMap,
    },
    AffineState {
        c0: f64,
        c1: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
    Perturbed {
        base: Box<Kernel>,
        shift: f64,
    },
}

impl From<KernelRecord> for Kernel {
    fn from(r: KernelRecord) -> Self {
        match r {
            KernelRecord::Zero {} => Kernel::Zero,
            KernelRecord::ConstantInT { c0, cs, state } => Kernel::ConstantInT { c0, cs, state },
            KernelRecord::SeparableProduct { weight, state } => Kernel::SeparableProduct { weight, state },
            KernelRecord::AffineState { c0, c1, cap } => Kernel::AffineState { c0, c1, cap },
            KernelRecord::Perturbed { base, shift } => Kernel::Perturbed { base, shift },
        }
    }
}

impl Kernel {
    pub fn affine_state(c0: f64, c1: f64) -> Self {
        Kernel::AffineState { c0, c1, cap: None }
    }

    pub fn capped_affine_state(c0: f64, c1: f64, cap: f64) -> Self {
        Kernel::AffineState { c0, c1, cap: Some(cap) }
    }

    pub fn perturbed(base: Kernel, shift: f64) -> Self {
        Kernel::Perturbed {
            base: Box::new(base),
            shift,
        }
    }

    /// Raw evaluation; no domain checks. NaN propagates.
    pub fn value(&self, t: f64, s: f64, x: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::ConstantInT { c0, cs, state } => (c0 + cs * s) * state.value(x),
            Kernel::SeparableProduct { weight, state } => weight.value(t, s) * state.value(x),
            Kernel::AffineState { c0, c1, cap } => {
                let x = cap.map_or(x, |c| x.min(c));
                c0 + c1 * x
            }
            Kernel::Perturbed { base, shift } => {
                let v = base.value(t, s, x) + shift;
                if v < 0.0 {
                    0.0
                } else {
                    v
                }
            }
        }
    }

    /// Declared majorant `m(t, s)`, valid for every state in `(0, x_max]`.
    pub fn declared_majorant(&self, t: f64, s: f64, x_max: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::ConstantInT { c0, cs, state } => (c0 + cs * s).abs() * state.sup(x_max),
            Kernel::SeparableProduct { weight, state } => weight.value(t, s).abs() * state.sup(x_max),
            Kernel::AffineState { c0, c1, cap } => {
                let x = cap.unwrap_or(x_max);
                c0.max(c0 + c1 * x)
            }
            Kernel::Perturbed { base, shift } => (base.declared_majorant(t, s, x_max) + shift).max(0.0),
        }
    }

    /// Whether the declared majorant changes with `x_max`.
    pub fn majorant_depends_on_x(&self) -> bool {
        match self {
            Kernel::Zero => false,
            Kernel::ConstantInT { state, .. } | Kernel::SeparableProduct { state, .. } => {
                state.bound_depends_on_x()
            }
            Kernel::AffineState { c1, cap, .. } => *c1 > 0.0 && cap.is_none(),
            Kernel::Perturbed { base, .. } => base.majorant_depends_on_x(),
        }
    }

    /// Declared monotonicity in the state argument.
    pub fn nondecreasing_in_x(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::ConstantInT { c0, cs, state } => {
                // the weight is nonnegative on [0,T] after validation
                state.nondecreasing() || (*c0 == 0.0 && *cs == 0.0)
            }
            Kernel::SeparableProduct { state, .. } => state.nondecreasing(),
            Kernel::AffineState { c1, .. } => *c1 >= 0.0,
            Kernel::Perturbed { base, .. } => base.nondecreasing_in_x(),
        }
    }

    /// Declared monotonicity in the first time argument.
    pub fn nonincreasing_in_t(&self) -> bool {
        match self {
            Kernel::Zero | Kernel::ConstantInT { .. } | Kernel::AffineState { .. } => true,
            Kernel::SeparableProduct { weight, .. } => weight.nonincreasing_in_t(),
            Kernel::Perturbed { base, .. } => base.nonincreasing_in_t(),
        }
    }

    /// Bound on `|∂²m/∂s²|` of the declared majorant over `[0,T]²`.
    pub fn majorant_curvature(&self, horizon: f64, x_max: f64) -> f64 {
        match self {
            Kernel::Zero | Kernel::ConstantInT { .. } | Kernel::AffineState { .. } => 0.0,
            Kernel::SeparableProduct { weight, state } => weight.curvature(horizon) * state.sup(x_max),
            Kernel::Perturbed { base, .. } => base.majorant_curvature(horizon, x_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_on(f64::INFINITY)
    }

    fn validate_on(&self, horizon: f64) -> Result<()> {
        match self {
            Kernel::Zero => Ok(()),
            Kernel::ConstantInT { c0, cs, state } => {
                state.validate()?;
                let end = if horizon.is_finite() { c0 + cs * horizon } else { *c0 };
                if !(c0.is_finite() && cs.is_finite() && *c0 >= 0.0 && end >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "constant_in_t weight c0 = {c0}, cs = {cs} is not nonnegative on [0,T]"
                    )));
                }
                Ok(())
            }
            Kernel::SeparableProduct { weight, state } => {
                state.validate()?;
                if horizon.is_finite() {
                    weight.validate(horizon)?;
                }
                Ok(())
            }
            Kernel::AffineState { c0, c1, cap } => {
                if !(c0.is_finite() && c1.is_finite() && *c0 >= 0.0) {
                    return Err(Error::InvalidParameter(format!("affine_state c0 = {c0}, c1 = {c1}")));
                }
                match cap {
                    Some(c) if !(c.is_finite() && *c > 0.0) => {
                        Err(Error::InvalidParameter(format!("affine_state cap = {c} must be positive")))
                    }
                    _ => Ok(()),
                }
            }
            Kernel::Perturbed { base, shift } => {
                if !shift.is_finite() {
                    return Err(Error::InvalidParameter(format!("perturbation shift = {shift}")));
                }
                base.validate_on(horizon)
            }
        }
    }
}

/// Majorant `m_i(t, s)` attached to a problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    rename_all = "snake_case",
    deny_unknown_fields,
    from = "MajorantRecord"
)]
pub enum Majorant {
    /// Use the kernel family's own closed-form majorant.
    #[default]
    Declared,
    Constant {
        c: f64,
    },
    Weight {
        weight: Weight,
    },
    /// `max(base + shift, 0)`
    Shifted {
        base: Box<Majorant>,
        shift: f64,
    },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum MajorantRecord {
    Declared {},
    Constant { c: f64 },
    Weight { weight: Weight },
    Shifted { base: Box<Majorant>, shift: f64 },
}

impl From<MajorantRecord> for Majorant {
    fn from(r: MajorantRecord) -> Self {
        match r {
            MajorantRecord::Declared {} => Majorant::Declared,
            MajorantRecord::Constant { c } => Majorant::Constant { c },
            MajorantRecord::Weight { weight } => Majorant::Weight { weight },
            MajorantRecord::Shifted { base, shift } => Majorant::Shifted { base, shift },
        }
    }
}

/// Selects one of the two kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Which {
    First,
    Second,
}

impl Which {
    pub const BOTH: [Which; 2] = [Which::First, Which::Second];

    pub fn label(self) -> &'static str {
        match self {
            Which::First => "f1",
            Which::Second => "f2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validation {
    /// Minimum of the sampled forcing.
    pub forcing_min: f64,
    /// Positivity of solutions is only guaranteed when this holds.
    pub forcing_strictly_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRecord {
    #[serde(rename = "T")]
    horizon: f64,
    forcing: Forcing,
    f1: Kernel,
    f2: Kernel,
    #[serde(default)]
    m1: Majorant,
    #[serde(default)]
    m2: Majorant,
}

/// A validated problem instance on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRecord", into = "ProblemRecord")]
pub struct Problem {
    horizon: f64,
    forcing: Forcing,
    f1: Kernel,
    f2: Kernel,
    m1: Majorant,
    m2: Majorant,
    validation: Validation,
}

impl TryFrom<ProblemRecord> for Problem {
    type Error = Error;

    fn try_from(r: ProblemRecord) -> Result<Self> {
        Problem::new(r.horizon, r.forcing, r.f1, r.f2)?.with_majorants(r.m1, r.m2)
    }
}

impl From<Problem> for ProblemRecord {
    fn from(p: Problem) -> Self {
        ProblemRecord {
            horizon: p.horizon,
            forcing: p.forcing,
            f1: p.f1,
            f2: p.f2,
            m1: p.m1,
            m2: p.m2,
        }
    }
}

impl Problem {
    /// Builds a problem with the kernels' declared majorants.
    pub fn new(horizon: f64, forcing: Forcing, f1: Kernel, f2: Kernel) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
        }
        forcing.validate()?;
        f1.validate_on(horizon)?;
        f2.validate_on(horizon)?;
        let validation = validate_forcing(&forcing, horizon)?;
        Ok(Problem {
            horizon,
            forcing,
            f1,
            f2,
            m1: Majorant::Declared,
            m2: Majorant::Declared,
            validation,
        })
    }

    pub fn with_majorants(mut self, m1: Majorant, m2: Majorant) -> Result<Self> {
        for m in [&m1, &m2] {
            validate_majorant(m, self.horizon)?;
        }
        self.m1 = m1;
        self.m2 = m2;
        Ok(self)
    }

    /// Same forcing and horizon with new kernels and majorants. The forcing
    /// was validated already, so it is not resampled.
    pub fn with_kernels(&self, f1: Kernel, f2: Kernel, m1: Majorant, m2: Majorant) -> Result<Self> {
        f1.validate_on(self.horizon)?;
        f2.validate_on(self.horizon)?;
        for m in [&m1, &m2] {
            validate_majorant(m, self.horizon)?;
        }
        Ok(Problem {
            f1,
            f2,
            m1,
            m2,
            ..self.clone()
        })
    }

    /// The problem with the two kernels (and their majorants) exchanged.
    pub fn swapped(&self) -> Self {
        Problem {
            f1: self.f2.clone(),
            f2: self.f1.clone(),
            m1: self.m2.clone(),
            m2: self.m1.clone(),
            ..self.clone()
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn kernel(&self, which: Which) -> &Kernel {
        match which {
            Which::First => &self.f1,
            Which::Second => &self.f2,
        }
    }

    pub fn majorant_spec(&self, which: Which) -> &Majorant {
        match which {
            Which::First => &self.m1,
            Which::Second => &self.m2,
        }
    }

    pub fn validation(&self) -> Validation {
        self.validation
    }

    /// `m_which(t, s)` with declared majorants bounded for states in `(0, x_max]`.
    pub fn majorant(&self, which: Which, t: f64, s: f64, x_max: f64) -> f64 {
        majorant_value(self.majorant_spec(which), self.kernel(which), t, s, x_max)
    }

    pub fn majorant_depends_on_x(&self, which: Which) -> bool {
        majorant_x_dependent(self.majorant_spec(which), self.kernel(which))
    }

    /// Bound on `|∂²m/∂s²|` for the chosen majorant.
    pub fn majorant_curvature(&self, which: Which, x_max: f64) -> f64 {
        majorant_curvature(self.majorant_spec(which), self.kernel(which), self.horizon, x_max)
    }

    pub fn kernels_nondecreasing_in_x(&self) -> bool {
        self.f1.nondecreasing_in_x() && self.f2.nondecreasing_in_x()
    }

    /// Stable identifier of the problem definition.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("problem serializes");
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        h.finish()
    }
}

fn majorant_value(m: &Majorant, kernel: &Kernel, t: f64, s: f64, x_max: f64) -> f64 {
    match m {
        Majorant::Declared => kernel.declared_majorant(t, s, x_max),
        Majorant::Constant { c } => *c,
        Majorant::Weight { weight } => weight.value(t, s),
        Majorant::Shifted { base, shift } => (majorant_value(base, kernel, t, s, x_max) + shift).max(0.0),
    }
}

fn majorant_x_dependent(m: &Majorant, kernel: &Kernel) -> bool {
    match m {
        Majorant::Declared => kernel.majorant_depends_on_x(),
        Majorant::Constant { .. } | Majorant::Weight { .. } => false,
        Majorant::Shifted { base, .. } => majorant_x_dependent(base, kernel),
    }
}

fn majorant_curvature(m: &Majorant, kernel: &Kernel, horizon: f64, x_max: f64) -> f64 {
    match m {
        Majorant::Declared => kernel.majorant_curvature(horizon, x_max),
        Majorant::Constant { .. } => 0.0,
        Majorant::Weight { weight } => weight.curvature(horizon),
        Majorant::Shifted { base, .. } => majorant_curvature(base, kernel, horizon, x_max),
    }
}

fn validate_majorant(m: &Majorant, horizon: f64) -> Result<()> {
    match m {
        Majorant::Declared => Ok(()),
        Majorant::Constant { c } if c.is_finite() && *c >= 0.0 => Ok(()),
        Majorant::Constant { c } => Err(Error::InvalidParameter(format!("majorant constant c = {c}"))),
        Majorant::Weight { weight } => weight.validate(horizon),
        Majorant::Shifted { base, shift } if shift.is_finite() => validate_majorant(base, horizon),
        Majorant::Shifted { shift, .. } => Err(Error::InvalidParameter(format!("majorant shift = {shift}"))),
    }
}

fn validate_forcing(forcing: &Forcing, horizon: f64) -> Result<Validation> {
    let n = FORCING_SAMPLES - 1;
    let samples: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = horizon * (i as f64 / n as f64);
            (t, forcing.value(t))
        })
        .collect();
    let mut min = f64::INFINITY;
    for (t, v) in samples {
        if !v.is_finite() {
            return Err(Error::Evaluation {
                context: format!("forcing at t = {t}"),
                value: v,
            });
        }
        if v < 0.0 {
            return Err(Error::NonPositiveForcing { t, value: v });
        }
        min = min.min(v);
    }
    Ok(Validation {
        forcing_min: min,
        forcing_strictly_positive: min > 0.0,
    })
}

fn check_time(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = DOMAIN_SLACK * hi.abs().max(1.0);
    if value.is_nan() || value < lo - slack || value > hi + slack {
        return Err(Error::Domain { what, value, lo, hi });
    }
    Ok(())
}

/// `a(t)` for `t ∈ [0, T]`.
pub fn eval_forcing(p: &Problem, t: f64) -> Result<f64> {
    check_time("t", t, 0.0, p.horizon)?;
    let v = p.forcing.value(t);
    if !v.is_finite() {
        return Err(Error::Evaluation {
            context: format!("forcing at t = {t}"),
            value: v,
        });
    }
    if v < 0.0 {
        return Err(Error::NonPositiveForcing { t, value: v });
    }
    Ok(v)
}

/// Checked kernel evaluation on `0 ≤ s ≤ t ≤ T`, `x ≥ 0`.
pub fn eval_kernel(k: &Kernel, horizon: f64, t: f64, s: f64, x: f64) -> Result<f64> {
    check_time("t", t, 0.0, horizon)?;
    check_time("s", s, 0.0, t)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            what: "x",
            value: x,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if x == 0.0 {
        log::warn!("kernel evaluated at x = 0, outside the positive cone");
    }
    let v = k.value(t, s, x);
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Evaluation {
            context: format!("kernel at (t, s, x) = ({t}, {s}, {x})"),
            value: v,
        });
    }
    Ok(v)
}

/// Builds a problem whose exact solution is `x_star` up to the oracle
/// quadrature error `O((T / oracle_n)²)`.
pub fn make_manufactured(
    x_star: Forcing,
    f1: Kernel,
    f2: Kernel,
    horizon: f64,
    oracle_n: usize,
) -> Result<Problem> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
    }
    if oracle_n < MIN_ORACLE_PANELS {
        return Err(Error::InvalidParameter(format!(
            "oracle_n = {oracle_n} must be at least {MIN_ORACLE_PANELS}"
        )));
    }
    x_star.validate()?;
    f1.validate_on(horizon)?;
    f2.validate_on(horizon)?;
    let manufactured = Manufactured {
        x_star,
        f1: f1.clone(),
        f2: f2.clone(),
        oracle_n,
    };
    let bad = (0..=oracle_n)
        .into_par_iter()
        .map(|k| {
            let t = horizon * (k as f64 / oracle_n as f64);
            let x = manufactured.x_star.value(t);
            if !(x.is_finite() && x > 0.0) {
                return Some(Err(Error::InvalidParameter(format!(
                    "manufactured solution must be positive, x*({t}) = {x}"
                ))));
            }
            let (i1, i2) = manufactured.oracle_integrals(t);
            let a = x - i1 * i2;
            if !a.is_finite() {
                Some(Err(Error::Evaluation {
                    context: format!("manufactured forcing at t = {t}"),
                    value: a,
                }))
            } else if a < 0.0 {
                Some(Ok((t, a)))
            } else {
                None
            }
        })
        .find_first(|r| r.is_some())
        .flatten();
    match bad {
        Some(Err(e)) => return Err(e),
        Some(Ok((t, value))) => return Err(Error::NonPositiveForcing { t, value }),
        None => {}
    }
    Problem::new(horizon, Forcing::Manufactured(Box::new(manufactured)), f1, f2)
}
