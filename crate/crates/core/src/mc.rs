//! Seeded Monte Carlo simulation of displaced photon counting.
//!
//! Outcomes `(m, n)` are drawn from a [`JointCountDistribution`] by inverse
//! CDF over the row-major flattened table, renormalised by its mass.
//!
//! # Random stream
//!
//! Trial `i` of a run with seed `s` consumes 64-bit word `i` of the ChaCha8
//! keystream keyed by `s` (word position `2i` in 32-bit units) and maps it
//! to `u = (w >> 11) · 2⁻⁵³ ∈ [0, 1)`. The stream is therefore addressable
//! by trial index: a run may be split into blocks evaluated on any number of
//! threads and the outcomes are identical to a sequential run.
//!
//! Multi-setting experiments give setting `k` the sub-seed
//! [`derive_seed`]`(s, k)`.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{BellSettings, Combination};
use crate::error::{Error, Result};
use crate::fock::{FockConfig, JointCountDistribution, DEFAULT_TOL};
use crate::params::SqueezingParam;

const BLOCK: u64 = 1 << 16;

/// What a detector reports for a photocount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    /// Resolves the photon number; the event is scored by its parity
    /// `(−1)^m (−1)^n`.
    NumberResolving,
    /// Geiger-mode detector: only "no click" (`m = 0`) versus "click".
    BinaryNoCount,
}

impl DetectorModel {
    /// Joint parity `(−1)^{m+n}` for [`DetectorModel::NumberResolving`]; the
    /// joint no-click indicator `[m = 0][n = 0]` for
    /// [`DetectorModel::BinaryNoCount`].
    pub fn score(self, m: usize, n: usize) -> f64 {
        match self {
            DetectorModel::NumberResolving => {
                if (m + n) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            DetectorModel::BinaryNoCount => ((m == 0) && (n == 0)) as u8 as f64,
        }
    }

    /// Per-detector readings: parities `(±1, ±1)` or no-click indicators
    /// `(0|1, 0|1)`.
    pub fn readings(self, m: usize, n: usize) -> (i8, i8) {
        match self {
            DetectorModel::NumberResolving => (1 - 2 * (m % 2) as i8, 1 - 2 * (n % 2) as i8),
            DetectorModel::BinaryNoCount => ((m == 0) as i8, (n == 0) as i8),
        }
    }
}

impl FromStr for DetectorModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "number" => Ok(DetectorModel::NumberResolving),
            "binary" => Ok(DetectorModel::BinaryNoCount),
            _ => Err(Error::InvalidInput(format!("unknown detector `{s}` (expected number or binary)"))),
        }
    }
}

impl fmt::Display for DetectorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorModel::NumberResolving => "number",
            DetectorModel::BinaryNoCount => "binary",
        })
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_trials: u64,
    pub seed: u64,
}

impl EstimateWithError {
    /// Estimate of a mean from `n` samples with the given sum and sum of
    /// squares; the standard error uses the unbiased sample variance.
    fn from_moments(sum: f64, sum_sq: f64, n: u64, seed: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        EstimateWithError { value: mean, std_error: (var / nf).sqrt(), n_trials: n, seed }
    }

    /// `|value − target| / std_error`; `0` when both numerator and
    /// denominator vanish, `∞` when only the error does.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for setting `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// Inverse-CDF sampler over a joint count table.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Sampler {
    /// Rejects tables whose mass deficit exceeds `tol`.
    pub fn new(dist: &JointCountDistribution, tol: f64) -> Result<Self> {
        if dist.deficit() > tol {
            return Err(Error::Truncation(format!(
                "distribution is missing {:.3e} of its mass (tolerance {tol:.1e})",
                dist.deficit()
            )));
        }
        let p = dist.probabilities();
        let last_positive =
            p.iter().rposition(|&x| x > 0.0).ok_or_else(|| Error::InvalidInput("distribution has no mass".into()))?;
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        Ok(Sampler { dim: dist.cutoff() + 1, cdf, last_positive })
    }

    /// Outcome for a uniform variate `u ∈ [0, 1)`.
    pub fn outcome(&self, u: f64) -> (usize, usize) {
        let total = self.cdf[self.cdf.len() - 1];
        let target = u * total;
        let idx = self.cdf.partition_point(|&c| c <= target).min(self.last_positive);
        (idx / self.dim, idx % self.dim)
    }

    /// Outcomes of trials `start..start+len` of the stream keyed by `seed`.
    pub fn outcomes_range(&self, seed: u64, start: u64, len: u64) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(2 * start as u128);
        (0..len).map(move |_| self.outcome(unit_interval(rng.next_u64())))
    }

    pub fn outcomes(&self, seed: u64, n_trials: u64) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.outcomes_range(seed, 0, n_trials)
    }

    /// Tallies `n_trials` outcomes in parallel blocks, reduced in block
    /// order.
    pub fn tally(&self, seed: u64, n_trials: u64) -> Tally {
        let blocks = n_trials.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK;
                let len = BLOCK.min(n_trials - start);
                let mut t = Tally::default();
                for (m, n) in self.outcomes_range(seed, start, len) {
                    t.record(m, n);
                }
                t
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Tally::default(), Tally::merge)
    }
}

#[inline]
fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Event counts from one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub trials: u64,
    /// Events with `m + n` even.
    pub even: u64,
    /// Events with `m = 0` and `n = 0`.
    pub none: u64,
    /// Events with `m = 0`.
    pub none_a: u64,
    /// Events with `n = 0`.
    pub none_b: u64,
}

impl Tally {
    fn record(&mut self, m: usize, n: usize) {
        self.trials += 1;
        self.even += ((m + n) % 2 == 0) as u64;
        self.none_a += (m == 0) as u64;
        self.none_b += (n == 0) as u64;
        self.none += (m == 0 && n == 0) as u64;
    }

    fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            even: self.even + o.even,
            none: self.none + o.none,
            none_a: self.none_a + o.none_a,
            none_b: self.none_b + o.none_b,
        }
    }

    /// Mean of the ±1 parity score.
    pub fn parity(&self, seed: u64) -> EstimateWithError {
        let odd = self.trials - self.even;
        let sum = self.even as f64 - odd as f64;
        EstimateWithError::from_moments(sum, self.trials as f64, self.trials, seed)
    }

    fn frequency(&self, hits: u64, seed: u64) -> EstimateWithError {
        EstimateWithError::from_moments(hits as f64, hits as f64, self.trials, seed)
    }

    /// No-click frequencies of both detectors and of each one alone.
    pub fn nocount(&self, seed: u64) -> NoCountEstimates {
        NoCountEstimates {
            joint: self.frequency(self.none, seed),
            a: self.frequency(self.none_a, seed),
            b: self.frequency(self.none_b, seed),
        }
    }
}

/// No-click frequencies from one sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoCountEstimates {
    pub joint: EstimateWithError,
    pub a: EstimateWithError,
    pub b: EstimateWithError,
}

fn check_trials(n_trials: u64) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::InvalidInput("number of trials must be positive".into()));
    }
    Ok(())
}

/// Draws `n_trials` outcomes. Identical arguments give identical streams.
pub fn sample_outcomes(dist: &JointCountDistribution, n_trials: u64, seed: u64) -> Result<Vec<(usize, usize)>> {
    check_trials(n_trials)?;
    let sampler = Sampler::new(dist, DEFAULT_TOL)?;
    Ok(sampler.outcomes(seed, n_trials).collect())
}

/// Mean of `(−1)^{m+n}` over `n_trials` number-resolving detections.
pub fn estimate_parity_correlation(
    dist: &JointCountDistribution,
    n_trials: u64,
    seed: u64,
) -> Result<EstimateWithError> {
    check_trials(n_trials)?;
    Ok(Sampler::new(dist, DEFAULT_TOL)?.tally(seed, n_trials).parity(seed))
}

/// Frequencies of `{m = 0 ∧ n = 0}`, `{m = 0}` and `{n = 0}` from a single
/// stream of binary detections.
pub fn estimate_nocount(dist: &JointCountDistribution, n_trials: u64, seed: u64) -> Result<NoCountEstimates> {
    check_trials(n_trials)?;
    Ok(Sampler::new(dist, DEFAULT_TOL)?.tally(seed, n_trials).nocount(seed))
}

/// Per-term detail of a simulated Bell experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellTerm {
    pub label: String,
    pub sign: f64,
    pub estimate: EstimateWithError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub combination: Combination,
    /// Signed sum of the terms; `std_error` adds the term errors in
    /// quadrature and `n_trials` counts all trials of all terms.
    pub estimate: EstimateWithError,
    pub terms: Vec<BellTerm>,
}

/// Simulates a CHSH (number-resolving detectors) or CH (binary detectors)
/// experiment. Every term is sampled independently with its own sub-seed
/// `derive_seed(seed, k)`, `k` being the term index.
///
/// CHSH terms: `E(α′;β′), E(α′;β), E(α;β′), −E(α;β)`.
/// CH terms: `p_ab(α′;β′), p_ab(α′;β), p_ab(α;β′), −p_ab(α;β), −p_a(α′), −p_b(β′)`,
/// where the single-detector terms are read from separate runs at
/// `(α′, β′)`.
pub fn mc_bell(
    r: SqueezingParam,
    settings: &BellSettings,
    combination: Combination,
    n_trials_per_setting: u64,
    seed: u64,
    fock: &FockConfig,
) -> Result<BellEstimate> {
    check_trials(n_trials_per_setting)?;
    let points = settings.joint_points();
    let labels = ["(a',b')", "(a',b)", "(a,b')", "(a,b)"];
    let signs = [1.0, 1.0, 1.0, -1.0];
    let mut terms = Vec::new();
    for (k, ((point, label), sign)) in points.iter().zip(labels).zip(signs).enumerate() {
        let dist = fock.distribution(r, point.alpha, point.beta)?;
        let sampler = Sampler::new(&dist, fock.tol)?;
        let sub = derive_seed(seed, k as u64);
        let tally = sampler.tally(sub, n_trials_per_setting);
        let (name, estimate) = match combination {
            Combination::Chsh => ("E", tally.parity(sub)),
            Combination::Ch => ("p_ab", tally.frequency(tally.none, sub)),
        };
        terms.push(BellTerm { label: format!("{name}{label}"), sign, estimate });
    }
    if combination == Combination::Ch {
        let dist = fock.distribution(r, settings.alpha_prime, settings.beta_prime)?;
        let sampler = Sampler::new(&dist, fock.tol)?;
        for (k, label) in [(4u64, "p_a(a')"), (5, "p_b(b')")] {
            let sub = derive_seed(seed, k);
            let t = sampler.tally(sub, n_trials_per_setting);
            let hits = if k == 4 { t.none_a } else { t.none_b };
            terms.push(BellTerm { label: label.into(), sign: -1.0, estimate: t.frequency(hits, sub) });
        }
    }
    let value = terms.iter().map(|t| t.sign * t.estimate.value).sum();
    let std_error = terms.iter().map(|t| t.estimate.std_error.powi(2)).sum::<f64>().sqrt();
    Ok(BellEstimate {
        combination,
        estimate: EstimateWithError { value, std_error, n_trials: n_trials_per_setting * terms.len() as u64, seed },
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{cutoff_autoselect, displaced_joint_distribution};
    use crate::params::ComplexAmplitude;

    fn sq(r: f64) -> SqueezingParam {
        SqueezingParam::new(r).unwrap()
    }

    #[test]
    fn point_mass_always_yields_origin() {
        let dist = JointCountDistribution::point_mass_at_origin();
        let s = sample_outcomes(&dist, 1000, 3).unwrap();
        assert!(s.iter().all(|&o| o == (0, 0)));
        let e = estimate_parity_correlation(&dist, 1000, 3).unwrap();
        assert_eq!((e.value, e.std_error), (1.0, 0.0));
        let q = estimate_nocount(&dist, 1000, 3).unwrap();
        assert_eq!((q.joint.value, q.a.value, q.b.value), (1.0, 1.0, 1.0));
        assert_eq!(q.joint.z_score(1.0), 0.0);
    }

    #[test]
    fn same_seed_same_stream() {
        let r = sq(0.6);
        let dist =
            displaced_joint_distribution(r, ComplexAmplitude::real(0.3).unwrap(), ComplexAmplitude::ZERO, 60, 1e-10)
                .unwrap();
        let a = sample_outcomes(&dist, 5000, 11).unwrap();
        let b = sample_outcomes(&dist, 5000, 11).unwrap();
        let c = sample_outcomes(&dist, 5000, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn blocked_tally_matches_sequential_stream() {
        let r = sq(0.9);
        let n = cutoff_autoselect(r, 0.5, 1e-10).unwrap();
        let dist = displaced_joint_distribution(
            r,
            ComplexAmplitude::new(0.2, 0.1).unwrap(),
            ComplexAmplitude::real(-0.5).unwrap(),
            n,
            1e-10,
        )
        .unwrap();
        let trials = 3 * BLOCK + 17;
        let sampler = Sampler::new(&dist, 1e-10).unwrap();
        let mut seq = Tally::default();
        for (m, k) in sampler.outcomes(5, trials) {
            seq.record(m, k);
        }
        assert_eq!(sampler.tally(5, trials), seq);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(pool.install(|| sampler.tally(5, trials)), seq);
        // The stream is addressable: a suffix starts where the prefix ended.
        let whole: Vec<_> = sampler.outcomes(5, 100).collect();
        let tail: Vec<_> = sampler.outcomes_range(5, 40, 60).collect();
        assert_eq!(&whole[40..], &tail[..]);
    }

    #[test]
    fn zero_probability_cells_are_never_drawn() {
        let dist = JointCountDistribution::from_probabilities(1, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let sampler = Sampler::new(&dist, 1e-10).unwrap();
        assert_eq!(sampler.outcome(0.0), (0, 0));
        assert_eq!(sampler.outcome(0.4999), (0, 0));
        assert_eq!(sampler.outcome(0.5), (1, 1));
        assert_eq!(sampler.outcome(1.0 - f64::EPSILON), (1, 1));
    }

    #[test]
    fn rejects_lossy_distributions_and_zero_trials() {
        let dist = JointCountDistribution::from_probabilities(1, vec![0.5, 0.0, 0.0, 0.4]).unwrap();
        assert!(matches!(Sampler::new(&dist, 1e-10), Err(Error::Truncation(_))));
        assert!(matches!(sample_outcomes(&dist, 10, 0), Err(Error::Truncation(_))));
        let ok = JointCountDistribution::point_mass_at_origin();
        assert!(matches!(sample_outcomes(&ok, 0, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn readings_follow_detector_model() {
        assert_eq!(DetectorModel::NumberResolving.readings(3, 2), (-1, 1));
        assert_eq!(DetectorModel::NumberResolving.score(3, 2), -1.0);
        assert_eq!(DetectorModel::BinaryNoCount.readings(0, 2), (1, 0));
        assert_eq!(DetectorModel::BinaryNoCount.score(0, 0), 1.0);
        assert_eq!(DetectorModel::BinaryNoCount.score(2, 2), 0.0);
        assert_eq!("number".parse::<DetectorModel>().unwrap(), DetectorModel::NumberResolving);
        assert!("geiger".parse::<DetectorModel>().is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let seeds: Vec<u64> = (0..6).map(|k| derive_seed(42, k)).collect();
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn vacuum_chsh_at_origin_is_exact() {
        let est = mc_bell(
            SqueezingParam::VACUUM,
            &BellSettings::default(),
            Combination::Chsh,
            1000,
            9,
            &FockConfig::default(),
        )
        .unwrap();
        assert_eq!(est.estimate.value, 2.0);
        assert_eq!(est.estimate.std_error, 0.0);
        assert_eq!(est.terms.len(), 4);
        let ch =
            mc_bell(SqueezingParam::VACUUM, &BellSettings::default(), Combination::Ch, 1000, 9, &FockConfig::default())
                .unwrap();
        assert_eq!(ch.estimate.value, 0.0);
        assert_eq!(ch.terms.len(), 6);
    }
}
