//! Truncated photon-number-basis model of the NOPA state.
//!
//! Nothing here uses the closed forms of [`crate::analytics`]; the module
//! builds the state from its number-state amplitudes, displaces it with
//! explicit matrix elements of `D̂(α)` and reads off the photocount
//! statistics. It is the independent check on every closed form.
//!
//! Detection at setting `(α, β)` applies `D̂†(α) ⊗ D̂†(β) = D̂(−α) ⊗ D̂(−β)` to
//! the state before counting, so the probability of `(0, 0)` counts is
//! `|⟨α,β|NOPA⟩|²`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{ComplexAmplitude, SqueezingParam};

/// Default bound on the probability mass lost to truncation.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest cutoff [`cutoff_autoselect`] will consider.
pub const MAX_CUTOFF: usize = 4096;

/// Number-state amplitudes `c_n = tanhⁿ r / cosh r`, `n = 0..=cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct NopaAmplitudes {
    r: SqueezingParam,
    c: Vec<f64>,
}

impl NopaAmplitudes {
    pub fn squeezing(&self) -> SqueezingParam {
        self.r
    }

    pub fn cutoff(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Norm missing from the truncated state, `tanh^{2(N+1)} r`.
    pub fn tail(&self) -> f64 {
        truncation_tail(self.r, self.cutoff())
    }
}

fn truncation_tail(r: SqueezingParam, cutoff: usize) -> f64 {
    let t = r.tanh();
    if t == 0.0 {
        0.0
    } else {
        (2.0 * (cutoff as f64 + 1.0) * t.ln()).exp()
    }
}

pub fn nopa_amplitudes(r: SqueezingParam, cutoff: usize) -> NopaAmplitudes {
    let t = r.tanh();
    let mut c = Vec::with_capacity(cutoff + 1);
    let mut cn = (-r.ln_cosh()).exp();
    for _ in 0..=cutoff {
        c.push(cn);
        cn *= t;
    }
    NopaAmplitudes { r, c }
}

/// Matrix elements `d[m][n] = ⟨m|D̂(α)|n⟩` for `m, n ≤ cutoff`, row-major.
///
/// Each element depends only on elements with smaller indices, so the block
/// is exact for its size: truncation shows up only as missing norm in the
/// columns, never as error in the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementMatrix {
    alpha: ComplexAmplitude,
    dim: usize,
    d: Vec<Complex64>,
}

impl DisplacementMatrix {
    pub fn alpha(&self) -> ComplexAmplitude {
        self.alpha
    }

    pub fn cutoff(&self) -> usize {
        self.dim - 1
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.d[m * self.dim + n]
    }

    pub fn column_norm_sqr(&self, n: usize) -> f64 {
        (0..self.dim).map(|m| self.get(m, n).norm_sqr()).sum()
    }

    /// `1 − Σ_m |d[m][n]|²`: the part of `D̂(α)|n⟩` above the cutoff.
    pub fn column_deficit(&self, n: usize) -> f64 {
        1.0 - self.column_norm_sqr(n)
    }

    /// Fails with [`Error::Truncation`] if any of the first `columns + 1`
    /// columns loses more than `tol` of its norm.
    pub fn check_columns(&self, columns: usize, tol: f64) -> Result<()> {
        for n in 0..=columns.min(self.cutoff()) {
            let deficit = self.column_deficit(n);
            if deficit > tol {
                return Err(Error::Truncation(format!(
                    "cutoff {} too small for |α| = {}: column {n} loses {deficit:.3e} > {tol:.1e}",
                    self.cutoff(),
                    self.alpha.norm()
                )));
            }
        }
        Ok(())
    }

    /// Truncated matrix product `self · other`.
    pub fn matmul(&self, other: &DisplacementMatrix) -> Vec<Complex64> {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &mut out[i * n..(i + 1) * n];
                for (o, j) in row.iter_mut().zip(0..n) {
                    *o += a * other.get(k, j);
                }
            }
        }
        out
    }
}

/// Builds `⟨m|D̂(α)|n⟩` from the associated-Laguerre closed form
///
/// ```text
/// ⟨n+k|D̂(α)|n⟩ = √(n!/(n+k)!) α^k e^{−|α|²/2} L_n^{(k)}(|α|²),   k ≥ 0
/// ```
///
/// evaluated one diagonal `k` at a time. Folding the factorial ratio into
/// the Laguerre three-term recurrence gives, for `f_n = |⟨n+k|D̂|n⟩|`-scaled
/// values with `x = |α|²`,
///
/// ```text
/// f_{n+1} = ((2n+1+k−x) f_n − √(n(n+k)) f_{n−1}) / √((n+1)(n+1+k))
/// ```
///
/// with `f_0 = x^{k/2} e^{−x/2} / √k!` taken from log space. A running
/// log-scale keeps the recurrence finite where `f_0` would underflow. The
/// upper triangle follows from `D̂(α)† = D̂(−α)`:
/// `⟨m|D̂(α)|n⟩ = (−1)^{n−m} conj⟨n|D̂(α)|m⟩`.
pub fn displacement_matrix(alpha: ComplexAmplitude, cutoff: usize) -> DisplacementMatrix {
    const RESCALE: f64 = 1e150;
    let dim = cutoff + 1;
    let x = alpha.norm_sqr();
    let theta = alpha.im.atan2(alpha.re);
    let mut d = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut ln_fact_k = 0.0;
    for k in 0..dim {
        if k > 0 {
            ln_fact_k += (k as f64).ln();
            if x == 0.0 {
                // Only the main diagonal survives at α = 0.
                break;
            }
        }
        let kf = k as f64;
        let ln_f0 = if k == 0 { -0.5 * x } else { 0.5 * kf * x.ln() - 0.5 * x - 0.5 * ln_fact_k };
        let phase = Complex64::from_polar(1.0, kf * theta);
        // f = (prev, cur) · e^{ln_scale}
        let mut ln_scale = ln_f0;
        let mut prev = 0.0;
        let mut cur = 1.0;
        for n in 0..dim - k {
            let value = cur * ln_scale.exp();
            d[(n + k) * dim + n] = phase * value;
            let nf = n as f64;
            let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
                / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                prev /= RESCALE;
                cur /= RESCALE;
                ln_scale += RESCALE.ln();
            }
        }
    }
    for m in 0..dim {
        for n in m + 1..dim {
            let mirrored = d[n * dim + m].conj();
            d[m * dim + n] = if (n - m) % 2 == 0 { mirrored } else { -mirrored };
        }
    }
    DisplacementMatrix { alpha, dim, d }
}

/// Photocount statistics `p[m][n]` of the displaced state, row-major over
/// `m` (mode `a`) then `n` (mode `b`).
#[derive(Debug, Clone, PartialEq)]
pub struct JointCountDistribution {
    dim: usize,
    p: Vec<f64>,
    mass: f64,
}

impl JointCountDistribution {
    /// Wraps an explicit table, e.g. a point mass. Entries must be finite and
    /// non-negative and `p.len()` must be `(cutoff+1)²`.
    pub fn from_probabilities(cutoff: usize, p: Vec<f64>) -> Result<Self> {
        let dim = cutoff + 1;
        if p.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} probabilities for cutoff {cutoff}, got {}",
                dim * dim,
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidInput(format!("invalid probability {bad}")));
        }
        let mass = p.iter().sum();
        Ok(JointCountDistribution { dim, p, mass })
    }

    /// All probability on `(0, 0)`.
    pub fn point_mass_at_origin() -> Self {
        JointCountDistribution { dim: 1, p: vec![1.0], mass: 1.0 }
    }

    pub fn cutoff(&self) -> usize {
        self.dim - 1
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.p[m * self.dim + n]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `1 − mass`.
    pub fn deficit(&self) -> f64 {
        1.0 - self.mass
    }

    /// `Σ (−1)^{m+n} p[m][n]`.
    pub fn parity_expectation(&self) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.dim {
            for n in 0..self.dim {
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * self.get(m, n);
            }
        }
        acc
    }

    /// Probability of no counts on either detector.
    pub fn nocount_joint(&self) -> f64 {
        self.get(0, 0)
    }

    /// Probability of no counts on detector `a`, summed over mode `b`.
    pub fn nocount_a(&self) -> f64 {
        (0..self.dim).map(|n| self.get(0, n)).sum()
    }

    pub fn nocount_b(&self) -> f64 {
        (0..self.dim).map(|m| self.get(m, 0)).sum()
    }
}

/// Joint photocount distribution after displacing mode `a` by `−α` and mode
/// `b` by `−β` at the given cutoff.
///
/// `p[m][n] = |Σ_k c_k ⟨m|D̂(−α)|k⟩ ⟨n|D̂(−β)|k⟩|²`. Fails with
/// [`Error::Truncation`] when more than `tol` of the probability mass falls
/// outside the table.
pub fn displaced_joint_distribution(
    r: SqueezingParam,
    alpha: ComplexAmplitude,
    beta: ComplexAmplitude,
    cutoff: usize,
    tol: f64,
) -> Result<JointCountDistribution> {
    let amps = nopa_amplitudes(r, cutoff);
    let da = displacement_matrix(-alpha, cutoff);
    let db = displacement_matrix(-beta, cutoff);
    let dim = cutoff + 1;

    // b_t[k][n] = ⟨n|D̂(−β)|k⟩ · c_k, so each amplitude row is a dense axpy.
    let mut b_t = vec![Complex64::new(0.0, 0.0); dim * dim];
    for k in 0..dim {
        let ck = amps.c[k];
        for n in 0..dim {
            b_t[k * dim + n] = db.get(n, k) * ck;
        }
    }
    let mut p = vec![0.0; dim * dim];
    let mut row = vec![Complex64::new(0.0, 0.0); dim];
    for m in 0..dim {
        row.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for k in 0..dim {
            if amps.c[k] == 0.0 {
                break;
            }
            let a = da.get(m, k);
            for (acc, b) in row.iter_mut().zip(&b_t[k * dim..(k + 1) * dim]) {
                *acc += a * b;
            }
        }
        for (dst, amp) in p[m * dim..(m + 1) * dim].iter_mut().zip(&row) {
            *dst = amp.norm_sqr();
        }
    }
    let mass: f64 = p.iter().sum();
    let deficit = 1.0 - mass;
    if deficit > tol {
        return Err(Error::Truncation(format!(
            "cutoff {cutoff} loses {deficit:.3e} of the probability (tolerance {tol:.1e}) \
             at r = {r}, |α| = {}, |β| = {}",
            alpha.norm(),
            beta.norm()
        )));
    }
    Ok(JointCountDistribution { dim, p, mass })
}

/// Displaced joint parity from the number-state table.
pub fn parity_expectation_fock(
    r: SqueezingParam,
    alpha: ComplexAmplitude,
    beta: ComplexAmplitude,
    cutoff: usize,
    tol: f64,
) -> Result<f64> {
    Ok(displaced_joint_distribution(r, alpha, beta, cutoff, tol)?.parity_expectation())
}

/// Smallest cutoff `N` for which the probability mass lost by truncating
/// both the state and the displaced basis stays below `tol` for
/// displacements up to `max_disp` in magnitude.
///
/// The loss is bounded by
///
/// ```text
/// tanh^{2(N+1)} r + 2 Σ_{k≤N} c_k² (1 − Σ_{m≤N} |⟨m|D̂|k⟩|²)
/// ```
///
/// (state tail plus the leakage of each populated column of `D̂` past the
/// cutoff, once per mode). With `max_disp = 0` this reduces to the state
/// tail alone.
pub fn cutoff_autoselect(r: SqueezingParam, max_disp: f64, tol: f64) -> Result<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !max_disp.is_finite() || max_disp < 0.0 {
        return Err(Error::InvalidInput(format!(
            "maximum displacement must be finite and non-negative, got {max_disp}"
        )));
    }
    let unreachable = || {
        Error::Truncation(format!(
            "no cutoff up to {MAX_CUTOFF} reaches tolerance {tol:.1e} at r = {r}, |α| = {max_disp}"
        ))
    };

    let t = r.tanh();
    let state_cutoff = if t == 0.0 {
        0
    } else {
        // Smallest N with (N+1)·2 ln t < ln tol, nudged for rounding.
        let mut n = ((tol.ln() / (2.0 * t.ln())).floor().max(0.0)) as usize;
        while n > 0 && truncation_tail(r, n - 1) < tol {
            n -= 1;
        }
        while truncation_tail(r, n) >= tol {
            n += 1;
            if n > MAX_CUTOFF {
                return Err(unreachable());
            }
        }
        n
    };
    if state_cutoff > MAX_CUTOFF {
        return Err(unreachable());
    }
    if max_disp == 0.0 {
        return Ok(state_cutoff);
    }

    let disp = ComplexAmplitude { re: max_disp, im: 0.0 };
    let mut size = (2 * state_cutoff + 64).min(MAX_CUTOFF);
    loop {
        let d = displacement_matrix(disp, size);
        let amps = nopa_amplitudes(r, size);
        let weights: Vec<f64> = amps.c.iter().map(|c| c * c).collect();
        // partial[k] = Σ_{m≤N} |d[m][k]|² for the running cutoff N.
        let mut partial: Vec<f64> = Vec::with_capacity(size + 1);
        for n in 0..=size {
            for (k, s) in partial.iter_mut().enumerate() {
                *s += d.get(n, k).norm_sqr();
            }
            partial.push((0..=n).map(|m| d.get(m, n).norm_sqr()).sum());
            if n < state_cutoff {
                continue;
            }
            let leakage: f64 = weights[..=n].iter().zip(&partial).map(|(w, s)| w * (1.0 - s).max(0.0)).sum();
            if truncation_tail(r, n) + 2.0 * leakage < tol {
                return Ok(n);
            }
        }
        if size == MAX_CUTOFF {
            return Err(unreachable());
        }
        size = (size * 2).min(MAX_CUTOFF);
    }
}

/// How the photon-number cutoff is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cutoff {
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Cutoff {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Cutoff::Auto);
        }
        s.parse::<usize>()
            .map(Cutoff::Fixed)
            .map_err(|_| Error::InvalidInput(format!("cutoff must be `auto` or a non-negative integer, got `{s}`")))
    }
}

impl std::fmt::Display for Cutoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cutoff::Auto => f.write_str("auto"),
            Cutoff::Fixed(n) => write!(f, "{n}"),
        }
    }
}

/// Cutoff policy plus the tolerated truncation loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    pub cutoff: Cutoff,
    pub tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { cutoff: Cutoff::Auto, tol: DEFAULT_TOL }
    }
}

impl FockConfig {
    pub fn resolve(&self, r: SqueezingParam, max_disp: f64) -> Result<usize> {
        match self.cutoff {
            Cutoff::Auto => cutoff_autoselect(r, max_disp, self.tol),
            Cutoff::Fixed(n) => Ok(n),
        }
    }

    /// Distribution at `(α, β)` with the cutoff chosen by this policy.
    pub fn distribution(
        &self,
        r: SqueezingParam,
        alpha: ComplexAmplitude,
        beta: ComplexAmplitude,
    ) -> Result<JointCountDistribution> {
        let cutoff = self.resolve(r, alpha.norm().max(beta.norm()))?;
        displaced_joint_distribution(r, alpha, beta, cutoff, self.tol)
    }
}
