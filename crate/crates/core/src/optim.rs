//! Derivative-free maximisers used by the Bell-violation search.
//!
//! Both routines are deterministic: the same objective and configuration
//! always visit the same points in the same order.

use std::cmp::Ordering;

/// Outcome of a one-dimensional golden-section search.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMax {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximises a unimodal `f` on `[lo, hi]` by golden-section search, stopping
/// once the bracket is narrower than `xtol · (1 + |x|)`.
///
/// Ties between interior probes keep the left (smaller-`x`) sub-bracket, and
/// the lower endpoint is returned if it is at least as good as the interior
/// optimum.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> LineMax {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if (b - a) <= xtol * (1.0 + 0.5 * (a + b).abs()) {
            converged = true;
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
        trace.push(fc.max(fd));
    }
    let (mut x, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    let f_lo = f(lo.min(hi));
    if f_lo >= value {
        x = lo.min(hi);
        value = f_lo;
    }
    LineMax { x, value, iterations, converged, trace }
}

/// Grows `[lo, hi]` geometrically until `f` at the upper end falls below its
/// value at the midpoint, so a unimodal maximum on `[lo, ∞)` is enclosed.
/// Returns the final upper end.
pub fn expand_upper_bracket(f: impl Fn(f64) -> f64, lo: f64, mut hi: f64, limit: f64) -> f64 {
    while hi < limit {
        let mid = 0.5 * (lo + hi);
        if f(hi) < f(mid) {
            break;
        }
        hi *= 2.0;
    }
    hi.min(limit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexConfig {
    pub max_iter: usize,
    /// Stop when the spread of objective values across the simplex drops
    /// below this.
    pub ftol: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig { max_iter: 2000, ftol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMax {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

fn desc(a: f64, b: f64) -> Ordering {
    // NaN sorts last.
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.partial_cmp(&a).unwrap(),
    }
}

/// Nelder–Mead maximisation from `x0` with an axis-aligned initial simplex
/// of the given per-coordinate steps.
pub fn nelder_mead_max(f: impl Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], cfg: &SimplexConfig) -> SimplexMax {
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = f(&x);
        simplex.push((x, v));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps the original order of equal values.
        simplex.sort_by(|a, b| desc(a.1, b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (best - worst).abs() <= cfg.ftol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let along =
            |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(1.0);
        let fr = f(&xr);
        if fr > simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            // Outside contraction when the reflection beat the worst point,
            // inside contraction otherwise.
            let outside = fr > worst;
            let xc = along(if outside { 0.5 } else { -0.5 });
            let fc = f(&xc);
            let accept = if outside { fc >= fr } else { fc > worst };
            if accept {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = f(x);
                }
            }
        }
        trace.push(simplex.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max));
    }
    simplex.sort_by(|a, b| desc(a.1, b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexMax { x, value, iterations, converged, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let res = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-12, 500);
        assert!(res.converged);
        // The peak is only resolvable to about √ε.
        assert!((res.x - 0.3).abs() < 1e-7);
        assert!((res.value - 2.0).abs() < 1e-15);
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn golden_prefers_lower_endpoint_on_ties() {
        let res = golden_section_max(|x| -x * x, 0.0, 1.0, 1e-12, 500);
        assert_eq!(res.x, 0.0);
        assert_eq!(res.value, 0.0);
        let flat = golden_section_max(|_| 1.0, 0.0, 1.0, 1e-12, 500);
        assert_eq!(flat.x, 0.0);
    }

    #[test]
    fn golden_reports_budget_exhaustion() {
        let res = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-15, 5);
        assert!(!res.converged);
        assert_eq!(res.iterations, 5);
    }

    #[test]
    fn bracket_expands_past_peak() {
        let hi = expand_upper_bracket(|x| x * (-x / 7.0).exp(), 0.0, 1.0, 1e6);
        assert!(hi >= 7.0);
        assert_eq!(expand_upper_bracket(|x| x, 0.0, 1.0, 100.0), 100.0);
    }

    #[test]
    fn simplex_finds_rosenbrock_peak() {
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let cfg = SimplexConfig { max_iter: 5000, ftol: 1e-14 };
        let res = nelder_mead_max(f, &[-1.2, 1.0], &[0.5, 0.5], &cfg);
        assert!(res.converged);
        assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{:?}", res.x);
    }

    #[test]
    fn simplex_is_deterministic_and_monotone() {
        let f = |x: &[f64]| (-(x[0] - 0.2).powi(2) - 2.0 * (x[1] + 0.4).powi(2) - x[2].powi(2)).exp();
        let cfg = SimplexConfig::default();
        let a = nelder_mead_max(f, &[0.0; 3], &[0.1; 3], &cfg);
        let b = nelder_mead_max(f, &[0.0; 3], &[0.1; 3], &cfg);
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!((a.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_stops_at_budget() {
        let f = |x: &[f64]| -(x[0] * x[0] + x[1] * x[1]);
        let res = nelder_mead_max(f, &[3.0, 3.0], &[0.1, 0.1], &SimplexConfig { max_iter: 3, ftol: 0.0 });
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
    }
}
