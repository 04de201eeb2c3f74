//! CHSH and Clauser–Horne combinations, parameter scans, and the search for
//! displacement settings that maximise the violation.
//!
//! # CHSH with displaced parity
//!
//! With the parity correlation `E(α;β)` as the ±1 correlation function,
//!
//! ```text
//! B = E(α′;β′) + E(α′;β) + E(α;β′) − E(α;β),    local bound |B| ≤ 2.
//! ```
//!
//! On the settings family `α′ = β′ = 0`, `α = √J`, `β = −√J` and with
//! `u = 2J cosh 2r`, `t = tanh 2r`,
//!
//! ```text
//! B(u) = 1 + 2e^{−u} − e^{−2u(1+t)},
//! ```
//!
//! maximised at `u* = ln(1+t)/(1+2t)`. As `r → ∞` this tends to
//! `1 + 3·2^{−4/3} ≈ 2.19055`. [`chsh_optimize`] reports this family's
//! optimum as its headline value and, separately, the result of an
//! unconstrained local search over all four complex settings started from
//! it. The unconstrained search finds larger values (about 2.32 for strong
//! squeezing), so the two are never conflated.
//!
//! # Clauser–Horne with no-count probabilities
//!
//! ```text
//! CH = p_ab(α′;β′) + p_ab(α;β′) + p_ab(α′;β) − p_ab(α;β) − p_a(α′) − p_b(β′),
//! ```
//!
//! local bounds `−1 ≤ CH ≤ 0`. With `α′ = β′ = 0` this is [`ch_combination`];
//! at `α = √J`, `β = −√J` it equals [`analytics::ch_closed_form`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::optim::{self, SimplexConfig};
use crate::params::{ComplexAmplitude, PhasePoint, SqueezingParam};

/// `1 + 3·2^{−4/3}`: the strong-squeezing limit of the CHSH value on the
/// `α′ = β′ = 0, α = −β = √J` family.
pub fn chsh_restricted_limit() -> f64 {
    1.0 + 3.0 * 2f64.powf(-4.0 / 3.0)
}

/// Rounding slack when comparing against a local bound. Product states sit
/// exactly on the CHSH bound and floating-point evaluation can overshoot it
/// by a few ulps.
pub const VIOLATION_MARGIN: f64 = 1e-12;

/// Four displacement settings: `alpha`, `alpha_prime` for detector `a` and
/// `beta`, `beta_prime` for detector `b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BellSettings {
    pub alpha: ComplexAmplitude,
    pub alpha_prime: ComplexAmplitude,
    pub beta: ComplexAmplitude,
    pub beta_prime: ComplexAmplitude,
}

impl BellSettings {
    /// `α′ = β′ = 0`, `α = √J`, `β = −√J`.
    pub fn restricted(intensity: f64) -> Result<Self> {
        if !intensity.is_finite() || intensity < 0.0 {
            return Err(Error::InvalidInput(format!(
                "displacement intensity must be finite and non-negative, got {intensity}"
            )));
        }
        let s = intensity.sqrt();
        Ok(BellSettings {
            alpha: ComplexAmplitude { re: s, im: 0.0 },
            alpha_prime: ComplexAmplitude::ZERO,
            beta: ComplexAmplitude { re: -s, im: 0.0 },
            beta_prime: ComplexAmplitude::ZERO,
        })
    }

    /// Components in the order `α, α′, β, β′`, real part first.
    pub fn to_components(&self) -> [f64; 8] {
        let [a, ap, b, bp] = [self.alpha, self.alpha_prime, self.beta, self.beta_prime];
        [a.re, a.im, ap.re, ap.im, b.re, b.im, bp.re, bp.im]
    }

    pub fn from_components(x: &[f64]) -> Result<Self> {
        if x.len() != 8 {
            return Err(Error::InvalidInput(format!("expected 8 components, got {}", x.len())));
        }
        Ok(BellSettings {
            alpha: ComplexAmplitude::new(x[0], x[1])?,
            alpha_prime: ComplexAmplitude::new(x[2], x[3])?,
            beta: ComplexAmplitude::new(x[4], x[5])?,
            beta_prime: ComplexAmplitude::new(x[6], x[7])?,
        })
    }

    /// The four joint settings in the order `(α′,β′), (α′,β), (α,β′), (α,β)`,
    /// matching the signs `+ + + −` of both combinations.
    pub fn joint_points(&self) -> [PhasePoint; 4] {
        [
            PhasePoint::new(self.alpha_prime, self.beta_prime),
            PhasePoint::new(self.alpha_prime, self.beta),
            PhasePoint::new(self.alpha, self.beta_prime),
            PhasePoint::new(self.alpha, self.beta),
        ]
    }
}

/// Which Bell combination to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    Chsh,
    Ch,
}

impl Combination {
    /// Local-realistic `(lower, upper)` bounds.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Combination::Chsh => (-2.0, 2.0),
            Combination::Ch => (-1.0, 0.0),
        }
    }

    /// `true` when `value` lies outside the local bounds by more than
    /// [`VIOLATION_MARGIN`].
    pub fn violates(self, value: f64) -> bool {
        let (lo, hi) = self.bounds();
        value > hi + VIOLATION_MARGIN || value < lo - VIOLATION_MARGIN
    }
}

impl FromStr for Combination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chsh" => Ok(Combination::Chsh),
            "ch" => Ok(Combination::Ch),
            _ => Err(Error::InvalidInput(format!("unknown combination `{s}` (expected chsh or ch)"))),
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combination::Chsh => "chsh",
            Combination::Ch => "ch",
        })
    }
}

/// CHSH value `B` from displaced parity correlations.
pub fn chsh_combination(r: SqueezingParam, s: &BellSettings) -> Result<f64> {
    let [pp, p0, zp, z0] = s.joint_points();
    let e = |p| analytics::parity_correlation(r, p);
    Ok(e(pp)? + e(p0)? + e(zp)? - e(z0)?)
}

/// Clauser–Horne value with all four settings free.
pub fn ch_general(r: SqueezingParam, s: &BellSettings) -> Result<f64> {
    let [pp, p0, zp, z0] = s.joint_points();
    let p = |q| analytics::nocount_joint(r, q);
    Ok(p(pp)? + p(p0)? + p(zp)?
        - p(z0)?
        - analytics::nocount_single_a(r, s.alpha_prime)?
        - analytics::nocount_single_b(r, s.beta_prime)?)
}

/// Clauser–Horne value with the primed settings at the origin:
/// `p_ab(0;0) + p_ab(α;0) + p_ab(0;β) − p_ab(α;β) − p_a(0) − p_b(0)`.
pub fn ch_combination(r: SqueezingParam, alpha: ComplexAmplitude, beta: ComplexAmplitude) -> Result<f64> {
    ch_general(
        r,
        &BellSettings { alpha, beta, alpha_prime: ComplexAmplitude::ZERO, beta_prime: ComplexAmplitude::ZERO },
    )
}

/// `ch_closed_form(r, J)` on the product grid; row `i` is `r_grid[i]`,
/// column `j` is `j_grid[j]`. Rows are computed in parallel and assembled
/// by index.
pub fn ch_scan(r_grid: &[SqueezingParam], j_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if r_grid.is_empty() || j_grid.is_empty() {
        return Err(Error::InvalidInput("scan grids must be non-empty".into()));
    }
    r_grid.par_iter().map(|&r| j_grid.iter().map(|&j| analytics::ch_closed_form(r, j)).collect()).collect()
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if v.partial_cmp(&values[b]) != Some(std::cmp::Ordering::Greater) => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Maximiser of a one-parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineOptimum {
    pub intensity: f64,
    pub value: f64,
}

const GOLDEN_XTOL: f64 = 1e-12;
const GOLDEN_MAX_ITER: usize = 400;
const J_UPPER_LIMIT: f64 = 1e3;

fn ch_line_search(r: SqueezingParam) -> Result<optim::LineMax> {
    // Validate once so the closure can treat errors as impossible.
    analytics::ch_closed_form(r, 1.0)?;
    let f = |j: f64| analytics::ch_closed_form(r, j).unwrap_or(f64::NAN);
    let hi = optim::expand_upper_bracket(f, 0.0, 1.0, J_UPPER_LIMIT);
    Ok(optim::golden_section_max(f, 0.0, hi, GOLDEN_XTOL, GOLDEN_MAX_ITER))
}

/// Largest [`analytics::ch_closed_form`] over `J ≥ 0`, found by golden-section
/// search after expanding the bracket. At `r = 0` the maximum is `0` at
/// `J = 0`.
#[allow(non_snake_case)]
pub fn ch_max_over_J(r: SqueezingParam) -> Result<LineOptimum> {
    let res = ch_line_search(r)?;
    Ok(LineOptimum { intensity: res.x, value: res.value })
}

/// Closed-form maximum of `B` over the restricted settings family.
pub fn chsh_restricted_analytic(r: SqueezingParam) -> Result<LineOptimum> {
    let cosh_2r = (2.0 * r.value()).cosh();
    if !cosh_2r.is_finite() {
        return Err(Error::Range(format!("cosh 2r overflows at r = {r}")));
    }
    let t = (2.0 * r.value()).tanh();
    let u = t.ln_1p() / (1.0 + 2.0 * t);
    let value = 1.0 + 2.0 * (-u).exp() - (-2.0 * u * (1.0 + t)).exp();
    Ok(LineOptimum { intensity: u / (2.0 * cosh_2r), value })
}

/// Settings for [`chsh_optimize`] and [`ch_optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Iteration budget of the unconstrained simplex refinement.
    pub max_iter: usize,
    /// Convergence threshold on the spread of objective values.
    pub ftol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { max_iter: 2000, ftol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
}

/// Outcome of the unconstrained search over all eight real components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedOptimum {
    pub settings: BellSettings,
    pub value: f64,
    pub violated: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of a violation search.
///
/// `settings`/`value`/`violated` describe the optimum over the restricted
/// family `α′ = β′ = 0, α = −β = √J`; `refined` holds the unconstrained
/// local optimum started from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub combination: Combination,
    pub r: SqueezingParam,
    pub settings: BellSettings,
    pub value: f64,
    pub bound_low: f64,
    pub bound_high: f64,
    pub violated: bool,
    /// Maximising displacement intensity `J*` of the restricted family.
    pub intensity: f64,
    /// Closed-form restricted maximum, where one exists (CHSH only).
    pub analytic_value: Option<f64>,
    pub refined: RefinedOptimum,
    /// `false` if either search stopped on its iteration budget.
    pub converged: bool,
    pub message: Option<String>,
    pub optimizer_trace: Vec<TracePoint>,
}

fn refine(
    combination: Combination,
    r: SqueezingParam,
    seed: &BellSettings,
    cfg: &OptimizerConfig,
) -> Result<optim::SimplexMax> {
    let objective = |x: &[f64]| -> f64 {
        let Ok(s) = BellSettings::from_components(x) else { return f64::NAN };
        match combination {
            Combination::Chsh => chsh_combination(r, &s),
            Combination::Ch => ch_general(r, &s),
        }
        .unwrap_or(f64::NAN)
    };
    let x0 = seed.to_components();
    let scale = seed.alpha.norm().max(0.1 * (-r.value()).exp());
    let steps = [0.5 * scale; 8];
    Ok(optim::nelder_mead_max(objective, &x0, &steps, &SimplexConfig { max_iter: cfg.max_iter, ftol: cfg.ftol }))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    combination: Combination,
    r: SqueezingParam,
    line: optim::LineMax,
    intensity: f64,
    value: f64,
    analytic_value: Option<f64>,
    cfg: &OptimizerConfig,
) -> Result<ViolationReport> {
    let settings = BellSettings::restricted(intensity)?;
    let simplex = refine(combination, r, &settings, cfg)?;
    let (bound_low, bound_high) = combination.bounds();

    let mut optimizer_trace: Vec<TracePoint> =
        line.trace.iter().enumerate().map(|(i, &v)| TracePoint { iteration: i + 1, value: v }).collect();
    let offset = optimizer_trace.len();
    optimizer_trace
        .extend(simplex.trace.iter().enumerate().map(|(i, &v)| TracePoint { iteration: offset + i + 1, value: v }));

    let converged = line.converged && simplex.converged;
    let message = (!converged).then(|| {
        let mut parts = Vec::new();
        if !line.converged {
            parts.push(format!("line search hit its budget of {GOLDEN_MAX_ITER} iterations"));
        }
        if !simplex.converged {
            parts.push(format!("simplex refinement hit its budget of {} iterations", cfg.max_iter));
        }
        format!("{}; best-so-far reported", parts.join(", "))
    });

    let refined_settings = BellSettings::from_components(&simplex.x)?;
    Ok(ViolationReport {
        combination,
        r,
        settings,
        value,
        bound_low,
        bound_high,
        violated: combination.violates(value),
        intensity,
        analytic_value,
        refined: RefinedOptimum {
            settings: refined_settings,
            value: simplex.value,
            violated: combination.violates(simplex.value),
            iterations: simplex.iterations,
            converged: simplex.converged,
        },
        converged,
        message,
        optimizer_trace,
    })
}

/// Searches for displacement settings that maximise `B`.
///
/// First a golden-section search over `u = 2J cosh 2r` on the restricted
/// family, then a Nelder–Mead refinement over all eight real components
/// seeded with the restricted optimum.
pub fn chsh_optimize(r: SqueezingParam, cfg: &OptimizerConfig) -> Result<ViolationReport> {
    let analytic = chsh_restricted_analytic(r)?;
    let cosh_2r = (2.0 * r.value()).cosh();
    let f = |u: f64| {
        BellSettings::restricted(u / (2.0 * cosh_2r)).and_then(|s| chsh_combination(r, &s)).unwrap_or(f64::NAN)
    };
    let hi = optim::expand_upper_bracket(f, 0.0, 1.0, 1e3);
    let line = optim::golden_section_max(f, 0.0, hi, GOLDEN_XTOL, GOLDEN_MAX_ITER);
    let intensity = line.x / (2.0 * cosh_2r);
    let value = line.value;
    assemble(Combination::Chsh, r, line, intensity, value, Some(analytic.value), cfg)
}

/// Searches for displacement settings that maximise `CH`: the restricted
/// optimum is [`ch_max_over_J`]; the refinement frees all four settings of
/// [`ch_general`].
pub fn ch_optimize(r: SqueezingParam, cfg: &OptimizerConfig) -> Result<ViolationReport> {
    let line = ch_line_search(r)?;
    let (intensity, value) = (line.x, line.value);
    assemble(Combination::Ch, r, line, intensity, value, None, cfg)
}

pub fn optimize(r: SqueezingParam, combination: Combination, cfg: &OptimizerConfig) -> Result<ViolationReport> {
    match combination {
        Combination::Chsh => chsh_optimize(r, cfg),
        Combination::Ch => ch_optimize(r, cfg),
    }
}
