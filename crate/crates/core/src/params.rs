//! Parameter types shared by every module: the squeezing parameter and
//! phase-space amplitudes.

use std::fmt;
use std::ops::Neg;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction strength `r = χt` of the parametric amplifier.
///
/// Always finite and non-negative; `r = 0` is the two-mode vacuum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SqueezingParam(f64);

impl SqueezingParam {
    pub const VACUUM: SqueezingParam = SqueezingParam(0.0);

    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidInput(format!("squeezing parameter must be finite and non-negative, got {r}")));
        }
        // Normalise -0.0 so that equality and formatting are stable.
        Ok(SqueezingParam(r + 0.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `tanh r`, the ratio of successive Fock amplitudes.
    #[inline]
    pub fn tanh(self) -> f64 {
        self.0.tanh()
    }

    /// `ln cosh r`, evaluated without overflow for large `r`.
    pub fn ln_cosh(self) -> f64 {
        let r = self.0;
        r + (-2.0 * r).exp().ln_1p() - std::f64::consts::LN_2
    }

    /// `1 / cosh² r`, the vacuum-overlap probability of the state.
    pub fn sech_sq(self) -> f64 {
        (-2.0 * self.ln_cosh()).exp()
    }
}

impl TryFrom<f64> for SqueezingParam {
    type Error = Error;
    fn try_from(r: f64) -> Result<Self> {
        SqueezingParam::new(r)
    }
}

impl From<SqueezingParam> for f64 {
    fn from(r: SqueezingParam) -> f64 {
        r.0
    }
}

impl fmt::Display for SqueezingParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A complex phase-space amplitude (displacement setting or quasidistribution
/// argument), stored as its two real quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: ComplexAmplitude = ComplexAmplitude { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidInput(format!("amplitude components must be finite, got ({re}, {im})")));
        }
        Ok(ComplexAmplitude { re, im })
    }

    /// A real amplitude `x + 0i`.
    pub fn real(x: f64) -> Result<Self> {
        Self::new(x, 0.0)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    #[inline]
    pub fn conj(self) -> Self {
        ComplexAmplitude { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Neg for ComplexAmplitude {
    type Output = ComplexAmplitude;
    fn neg(self) -> Self {
        ComplexAmplitude { re: -self.re, im: -self.im }
    }
}

impl From<ComplexAmplitude> for Complex64 {
    fn from(a: ComplexAmplitude) -> Complex64 {
        a.to_complex()
    }
}

/// Formats as the literal accepted by [`FromStr`], e.g. `0.5-0.3i`. The
/// shortest round-trip representation of each component is used, so
/// `s.parse::<ComplexAmplitude>()` recovers the value bit for bit.
impl fmt::Display for ComplexAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_sign_negative() { '-' } else { '+' };
        write!(f, "{}{}{}i", self.re, sign, self.im.abs())
    }
}

/// Parses `a+bi` / `a-bi`: a real part, a mandatory sign, an imaginary part
/// and a trailing `i`, with no whitespace. Either component may use
/// exponent notation (`1e-3-2.5E+1i`).
impl FromStr for ComplexAmplitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidInput(format!("malformed complex literal `{s}`: {why}"));
        let body = s.strip_suffix('i').ok_or_else(|| bad("expected the form a+bi"))?;
        if body.chars().any(char::is_whitespace) {
            return Err(bad("whitespace is not allowed"));
        }
        let bytes = body.as_bytes();
        // Split at the last sign that does not belong to an exponent or
        // to the leading sign of the real part.
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
            .ok_or_else(|| bad("missing sign between real and imaginary parts"))?;
        let (re_str, im_str) = body.split_at(split);
        let re: f64 = re_str.parse().map_err(|_| bad("real part is not a number"))?;
        let im_digits = &im_str[1..];
        if im_digits.is_empty() || im_digits.starts_with(['+', '-']) {
            return Err(bad("imaginary part is not a number"));
        }
        let im: f64 = im_str.parse().map_err(|_| bad("imaginary part is not a number"))?;
        ComplexAmplitude::new(re, im).map_err(|_| bad("components must be finite"))
    }
}

/// Argument of the two-mode phase-space functions: one amplitude per mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: ComplexAmplitude,
    pub beta: ComplexAmplitude,
}

impl PhasePoint {
    pub fn new(alpha: ComplexAmplitude, beta: ComplexAmplitude) -> Self {
        PhasePoint { alpha, beta }
    }

    /// Both amplitudes real.
    pub fn real(alpha: f64, beta: f64) -> Result<Self> {
        Ok(PhasePoint { alpha: ComplexAmplitude::real(alpha)?, beta: ComplexAmplitude::real(beta)? })
    }

    pub fn origin() -> Self {
        PhasePoint::default()
    }

    pub fn swapped(self) -> Self {
        PhasePoint { alpha: self.beta, beta: self.alpha }
    }

    pub fn conj(self) -> Self {
        PhasePoint { alpha: self.alpha.conj(), beta: self.beta.conj() }
    }
}

impl Neg for PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> Self {
        PhasePoint { alpha: -self.alpha, beta: -self.beta }
    }
}
