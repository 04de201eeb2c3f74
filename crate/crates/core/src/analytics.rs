//! Closed-form phase-space functions of the two-mode squeezed (NOPA) state
//!
//! ```text
//! |NOPA⟩ = (1/cosh r) Σₙ tanhⁿ r |n,n⟩
//! ```
//!
//! and the correlation observables built from them.
//!
//! Every exponent is assembled in log space and exponentiated once. The
//! two-mode Wigner exponent is written in the manifestly non-positive form
//!
//! ```text
//! −2 cosh 2r (|α|²+|β|²) + 2 sinh 2r (αβ + α*β*)
//!     = −e^{2r} |α − β*|² − e^{−2r} |α + β*|²
//! ```
//!
//! which avoids the cancellation between two large terms at strong
//! squeezing. Overflow of `e^{2r}` (r ≳ 354) or of the squared amplitudes
//! is reported as [`Error::Range`] rather than leaking an infinity.
//!
//! The single-mode Q marginal is `(1/(π cosh²r)) exp(−|α|²/cosh²r)`. This
//! normalization follows from the Gaussian integral
//! `∫d²β exp(−|β|² + 2 tanh r Re(αβ)) = π exp(tanh²r |α|²)` applied to
//! [`qfunc`]; the unit tests check it against direct quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::{ComplexAmplitude, PhasePoint, SqueezingParam};

/// `4/π²`, the value of the two-mode Wigner function at its maximum.
pub const WIGNER_PEAK: f64 = 4.0 / (PI * PI);

fn checked_norm_sqr(a: ComplexAmplitude, what: &str) -> Result<f64> {
    let n = a.norm_sqr();
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::Range(format!("|{what}|² overflows")))
    }
}

fn checked_exp(exponent: f64, what: &str) -> Result<f64> {
    if exponent.is_nan() || exponent > f64::MAX.ln() {
        return Err(Error::Range(format!("{what}: exponent {exponent} is not representable")));
    }
    Ok(exponent.exp())
}

/// Log of the displaced joint parity expectation, i.e. the Wigner exponent.
fn parity_exponent(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    let grow = (2.0 * r.value()).exp();
    if !grow.is_finite() {
        return Err(Error::Range(format!("e^(2r) overflows at r = {r}")));
    }
    let shrink = grow.recip();
    let (a, b) = (p.alpha, p.beta.conj());
    let diff = ComplexAmplitude { re: a.re - b.re, im: a.im - b.im };
    let sum = ComplexAmplitude { re: a.re + b.re, im: a.im + b.im };
    let diff_sq = checked_norm_sqr(diff, "α − β*")?;
    let sum_sq = checked_norm_sqr(sum, "α + β*")?;
    // 0 · ∞ cannot occur: both factors are finite here.
    Ok(-(grow * diff_sq) - shrink * sum_sq)
}

/// Log of `|⟨α,β|NOPA⟩|²`.
fn nocount_exponent(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    let a2 = checked_norm_sqr(p.alpha, "α")?;
    let b2 = checked_norm_sqr(p.beta, "β")?;
    // αβ + α*β* = 2 Re(αβ)
    let re_ab = p.alpha.re * p.beta.re - p.alpha.im * p.beta.im;
    let e = -a2 - b2 + 2.0 * r.tanh() * re_ab - 2.0 * r.ln_cosh();
    if e.is_nan() {
        return Err(Error::Range("Q exponent is undefined (∞ − ∞)".into()));
    }
    Ok(e)
}

fn single_nocount_exponent(r: SqueezingParam, a: ComplexAmplitude) -> Result<f64> {
    let a2 = checked_norm_sqr(a, "α")?;
    let ln_cosh = r.ln_cosh();
    // |α|²/cosh²r = |α|² e^{−2 ln cosh r}
    Ok(-a2 * (-2.0 * ln_cosh).exp() - 2.0 * ln_cosh)
}

/// Two-mode Wigner function `W(α;β)`.
///
/// ```
/// use nopa_bell::{analytics, PhasePoint, SqueezingParam};
/// let r = SqueezingParam::new(1.0)?;
/// let w = analytics::wigner(r, PhasePoint::origin())?;
/// assert!((w - 4.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
/// # Ok::<(), nopa_bell::Error>(())
/// ```
pub fn wigner(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    Ok(WIGNER_PEAK * checked_exp(parity_exponent(r, p)?, "wigner")?)
}

/// Two-mode Husimi function `Q(α;β) = |⟨α,β|NOPA⟩|²/π²`.
pub fn qfunc(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    Ok(checked_exp(nocount_exponent(r, p)?, "qfunc")? / (PI * PI))
}

/// Single-mode marginal of [`qfunc`] for mode `a`.
pub fn q_marginal_a(r: SqueezingParam, alpha: ComplexAmplitude) -> Result<f64> {
    Ok(checked_exp(single_nocount_exponent(r, alpha)?, "q_marginal")? / PI)
}

/// Single-mode marginal of [`qfunc`] for mode `b`; the state is symmetric
/// under mode exchange so this has the same form as [`q_marginal_a`].
pub fn q_marginal_b(r: SqueezingParam, beta: ComplexAmplitude) -> Result<f64> {
    q_marginal_a(r, beta)
}

/// Expectation of the displaced joint parity `Π̂_a(α) ⊗ Π̂_b(β)`; equal to
/// `(π²/4) W(α;β)`.
pub fn parity_correlation(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    checked_exp(parity_exponent(r, p)?, "parity_correlation")
}

/// Probability that neither detector fires after the displacements,
/// `p_ab(α;β) = π² Q(α;β)`.
pub fn nocount_joint(r: SqueezingParam, p: PhasePoint) -> Result<f64> {
    checked_exp(nocount_exponent(r, p)?, "nocount_joint")
}

/// Probability that detector `a` registers nothing, regardless of `b`.
pub fn nocount_single_a(r: SqueezingParam, alpha: ComplexAmplitude) -> Result<f64> {
    checked_exp(single_nocount_exponent(r, alpha)?, "nocount_single")
}

pub fn nocount_single_b(r: SqueezingParam, beta: ComplexAmplitude) -> Result<f64> {
    nocount_single_a(r, beta)
}

/// Clauser–Horne combination at real settings `α = √J`, `β = −√J`:
/// `(2e^{−J} − e^{−2J(1+tanh r)} − 1) / cosh²r`.
///
/// `J` is the displacement intensity and must be non-negative.
pub fn ch_closed_form(r: SqueezingParam, intensity: f64) -> Result<f64> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::InvalidInput(format!(
            "displacement intensity must be finite and non-negative, got {intensity}"
        )));
    }
    let j = intensity;
    // 2e^{−J} − 1 − e^{−2J(1+t)} written with expm1 so small J keeps its digits:
    // = 2 expm1(−J) − expm1(−2J(1+t))
    let inner = 2.0 * (-j).exp_m1() - (-2.0 * j * (1.0 + r.tanh())).exp_m1();
    Ok(r.sech_sq() * inner)
}

/// Leading behaviour `8 J e^{−2r}` of [`ch_closed_form`] for large `r` and
/// small `J`.
pub fn ch_asymptote(r: SqueezingParam, intensity: f64) -> f64 {
    8.0 * intensity * (-2.0 * r.value()).exp()
}
