//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nopa_bell::analytics::{self, ch_asymptote, ch_closed_form};
use nopa_bell::bell::{self, BellSettings, Combination, VIOLATION_MARGIN};
use nopa_bell::fock::FockConfig;
use nopa_bell::mc::{self, Sampler};
use nopa_bell::{ComplexAmplitude, PhasePoint, SqueezingParam};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const NOPA: &str = env!("CARGO_BIN_EXE_nopa");

fn sq(r: f64) -> SqueezingParam {
    SqueezingParam::new(r).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn nopa(args: &[&str]) -> std::process::Output {
    Command::new(NOPA).args(args).output().expect("run nopa")
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn chsh_limit() -> Outcome {
    let start = Instant::now();
    let out = nopa(&["optimize", "--r", "6", "--combination", "chsh", "--format", "json"]);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return outcome(false, format!("exit {:?}", out.status.code()));
    }
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let value = report["value"].as_f64().unwrap();
    let analytic = bell::chsh_restricted_analytic(sq(6.0)).unwrap().value;
    let pass = (value - 2.19055).abs() <= 0.01
        && (value - analytic).abs() <= 1e-6
        && report["violated"] == true
        && elapsed < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "value {value:.10}, |value-2.19055| = {:.2e}, |value-analytic| = {:.2e}, {:.2?}",
            (value - 2.19055).abs(),
            (value - analytic).abs(),
            elapsed
        ),
    )
}

fn ch_surface() -> Outcome {
    let start = Instant::now();
    let js = linspace(0.0, 1.5, 151);
    let rs: Vec<SqueezingParam> = linspace(0.0, 2.0, 101).into_iter().map(sq).collect();
    let closed = bell::ch_scan(&rs, &js).unwrap();
    let mut worst: f64 = 0.0;
    let mut rows_without_violation = Vec::new();
    for (r, row) in rs.iter().zip(&closed) {
        for (&j, &v) in js.iter().zip(row) {
            let six = bell::ch_combination(
                *r,
                ComplexAmplitude::real(j.sqrt()).unwrap(),
                ComplexAmplitude::real(-j.sqrt()).unwrap(),
            )
            .unwrap();
            worst = worst.max((six - v).abs());
        }
        if r.value() > 0.0 && !row.iter().any(|&v| v > 0.0) {
            rows_without_violation.push(r.value());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && rows_without_violation.is_empty() && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "max |six-term - closed| = {worst:.2e}, r rows in (0,2] without CH > 0: {}, {elapsed:.2?}",
            rows_without_violation.len()
        ),
    )
}

fn small_j_asymptote() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [3.0, 4.0, 5.0] {
        for j in [1e-4, 1e-3] {
            let exact = ch_closed_form(sq(r), j).unwrap();
            let approx = ch_asymptote(sq(r), j);
            worst = worst.max((exact - approx).abs() / approx);
        }
    }
    outcome(worst < 0.10, format!("max relative deviation {worst:.4}"))
}

fn random_amplitude(rng: &mut ChaCha8Rng, radius: f64) -> ComplexAmplitude {
    let rho = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    ComplexAmplitude::new(rho * phi.cos(), rho * phi.sin()).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let mut cases = Vec::new();
    for r in [0.0, 0.3, 0.8, 1.5] {
        for _ in 0..50 {
            cases.push((r, random_amplitude(&mut rng, 2.0), random_amplitude(&mut rng, 2.0)));
        }
    }
    let errs: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(r, a, b)| {
            let r = sq(r);
            let dist = FockConfig::default().distribution(r, a, b).unwrap();
            let p = PhasePoint::new(a, b);
            (
                (dist.parity_expectation() - analytics::parity_correlation(r, p).unwrap()).abs(),
                (dist.get(0, 0) - analytics::nocount_joint(r, p).unwrap()).abs(),
            )
        })
        .collect();
    let parity = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let nocount = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = parity <= 1e-8 && nocount <= 1e-8 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!("{} cases, max parity error {parity:.2e}, max p00 error {nocount:.2e}, {elapsed:.2?}", cases.len()),
    )
}

/// Midpoint rule over `[-half, half]^4` in `(Re α, Im α, Re β, Im β)`.
fn integrate4(f: impl Fn(PhasePoint) -> f64 + Sync, half: f64, n: usize) -> f64 {
    let h = 2.0 * half / n as f64;
    let x = |i: usize| -half + (i as f64 + 0.5) * h;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                let alpha = ComplexAmplitude::new(x(i), x(j)).unwrap();
                for k in 0..n {
                    for l in 0..n {
                        s += f(PhasePoint::new(alpha, ComplexAmplitude::new(x(k), x(l)).unwrap()));
                    }
                }
            }
            s
        })
        .sum::<f64>()
        * h.powi(4)
}

fn normalization() -> Outcome {
    let n = 64;
    let mut worst_norm: f64 = 0.0;
    for r in [0.0, 0.5, 1.0] {
        let r = sq(r);
        // Wide enough for the anti-squeezed direction, fine enough for the
        // squeezed one.
        let w = integrate4(|p| analytics::wigner(r, p).unwrap(), 3.0 * r.value().exp() + 2.5, n);
        let q = integrate4(|p| analytics::qfunc(r, p).unwrap(), 4.0 * (r.value().cosh() + 1.0), n);
        worst_norm = worst_norm.max((w - 1.0).abs()).max((q - 1.0).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut worst_marginal: f64 = 0.0;
    for i in 0..10 {
        let r = sq([0.5, 1.0, 1.5][i % 3]);
        let alpha = random_amplitude(&mut rng, 2.0);
        let centre = alpha.conj().to_complex() * r.tanh();
        let (half, m) = (7.0, 400);
        let h = 2.0 * half / m as f64;
        let mut s = 0.0;
        for k in 0..m {
            for l in 0..m {
                let beta = ComplexAmplitude::new(
                    centre.re - half + (k as f64 + 0.5) * h,
                    centre.im - half + (l as f64 + 0.5) * h,
                )
                .unwrap();
                s += analytics::qfunc(r, PhasePoint::new(alpha, beta)).unwrap();
            }
        }
        let marginal = analytics::q_marginal_a(r, alpha).unwrap();
        worst_marginal = worst_marginal.max((s * h * h - marginal).abs());
    }
    outcome(
        worst_norm <= 1e-4 && worst_marginal <= 1e-6,
        format!("max |integral - 1| = {worst_norm:.2e} ({n}^4 points), max marginal error {worst_marginal:.2e} at 10 points"),
    )
}

fn mc_consistency() -> Outcome {
    let cfg = FockConfig::default();
    let reps = 100u64;
    let n = 100_000u64;

    let r1 = sq(1.0);
    let origin =
        Sampler::new(&cfg.distribution(r1, ComplexAmplitude::ZERO, ComplexAmplitude::ZERO).unwrap(), cfg.tol).unwrap();
    let p_target = r1.sech_sq();
    let displaced_point = PhasePoint::real(0.2, -0.2).unwrap();
    let displaced =
        Sampler::new(&cfg.distribution(r1, displaced_point.alpha, displaced_point.beta).unwrap(), cfg.tol).unwrap();
    let e_target = analytics::parity_correlation(r1, displaced_point).unwrap();
    let r_ch = sq(0.5);
    let ch_settings = BellSettings::restricted(0.1975).unwrap();
    let ch_target = ch_closed_form(r_ch, 0.1975).unwrap();

    let covered = |z: f64| (z <= 2.0) as u32;
    let mut hits = [0u32; 3];
    for i in 0..reps {
        let seed = 10_000 + i;
        hits[0] += covered(origin.tally(seed, n).nocount(seed).joint.z_score(p_target));
        hits[1] += covered(displaced.tally(seed, n).parity(seed).z_score(e_target));
        hits[2] += covered(
            mc::mc_bell(r_ch, &ch_settings, Combination::Ch, n, seed, &cfg).unwrap().estimate.z_score(ch_target),
        );
    }

    let mut slowest = Duration::ZERO;
    let mut time = |f: &dyn Fn()| {
        let t = Instant::now();
        f();
        slowest = slowest.max(t.elapsed());
    };
    time(&|| {
        mc::estimate_nocount(
            &cfg.distribution(r1, ComplexAmplitude::ZERO, ComplexAmplitude::ZERO).unwrap(),
            1_000_000,
            1,
        )
        .unwrap();
    });
    time(&|| {
        mc::estimate_parity_correlation(
            &cfg.distribution(r1, displaced_point.alpha, displaced_point.beta).unwrap(),
            1_000_000,
            1,
        )
        .unwrap();
    });
    time(&|| {
        mc::mc_bell(r_ch, &ch_settings, Combination::Ch, 1_000_000, 1, &cfg).unwrap();
    });

    let pass = hits.iter().all(|&h| h >= 90) && slowest < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "within 2 sigma: p_ab {}/100, E {}/100, CH {}/100 ({n} trials per setting); slowest 10^6-trial run {slowest:.2?}",
            hits[0], hits[1], hits[2]
        ),
    )
}

fn no_false_violations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7AC0);
    let r = SqueezingParam::VACUUM;
    let (mut max_b, mut max_ch) = (0.0f64, f64::NEG_INFINITY);
    for i in 0..1000 {
        // Alternate wide and near-origin settings; the bound is tightest
        // near zero displacement.
        let radius = if i % 2 == 0 { 2.0 } else { 0.2 };
        let s = BellSettings {
            alpha: random_amplitude(&mut rng, radius),
            alpha_prime: random_amplitude(&mut rng, radius),
            beta: random_amplitude(&mut rng, radius),
            beta_prime: random_amplitude(&mut rng, radius),
        };
        max_b = max_b.max(bell::chsh_combination(r, &s).unwrap().abs());
        max_ch = max_ch.max(bell::ch_general(r, &s).unwrap());
    }
    outcome(
        max_b <= 2.0 + VIOLATION_MARGIN && max_ch <= 1e-12,
        format!("max |B| = {max_b:.15}, max CH = {max_ch:.3e} over 1000 settings"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "eval.json",
            vec!["eval", "chsh", "--r", "1.2", "--alpha", "0.1-0.05i", "--beta", "-0.1+0i", "--format", "json"],
        ),
        ("fig1.csv", vec!["fig1"]),
        ("fig2.csv", vec!["fig2"]),
        ("fig4.csv", vec!["fig4"]),
        ("scan.csv", vec!["scan-ch"]),
        ("opt.json", vec!["optimize", "--r", "0.8", "--combination", "ch"]),
        (
            "mc.json",
            vec!["mc", "--r", "1", "--alpha", "0.2+0i", "--beta", "-0.2+0i", "--trials", "500000", "--seed", "7"],
        ),
        (
            "mcbell.json",
            vec![
                "mc",
                "--r",
                "0.5",
                "--combination",
                "ch",
                "--alpha",
                "0.44+0i",
                "--beta",
                "-0.44+0i",
                "--trials",
                "200000",
                "--seed",
                "3",
            ],
        ),
    ];
    let mut mismatches = Vec::new();
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "0"] {
            let path = dir.path().join(format!("{threads}-{name}"));
            let mut full: Vec<&str> = args.clone();
            let p = path.to_str().unwrap().to_owned();
            full.extend(["--out", &p]);
            let status = Command::new(NOPA).args(&full).env("RAYON_NUM_THREADS", threads).status().unwrap();
            assert!(status.success(), "{name} failed");
            outputs.push(std::fs::read(&path).unwrap());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(*name);
        }
    }
    // Rerunning from the recorded argv reproduces the file.
    let manifest_file = dir.path().join("1-fig4.csv.manifest.json");
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest_file).unwrap()).unwrap();
    let argv: Vec<String> =
        manifest["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_owned()).collect();
    let replay_path = dir.path().join("replay.csv");
    let mut argv = argv[1..].to_vec();
    let out_idx = argv.iter().position(|a| a == "--out").unwrap();
    argv[out_idx + 1] = replay_path.to_str().unwrap().to_owned();
    Command::new(NOPA).args(&argv).status().unwrap();
    let replay_ok = std::fs::read(&replay_path).unwrap() == std::fs::read(dir.path().join("1-fig4.csv")).unwrap();
    let sha_ok = manifest["output_sha256"].as_str().unwrap().len() == 64 && Path::new(&replay_path).exists();
    outcome(
        mismatches.is_empty() && replay_ok && sha_ok,
        format!(
            "{} commands x 3 thread counts; differing outputs: {:?}; manifest replay identical: {replay_ok}",
            commands.len(),
            mismatches
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("1 CHSH limit value", chsh_limit),
        ("2 CH violation surface", ch_surface),
        ("3 small-J asymptote", small_j_asymptote),
        ("4 oracle equivalence", oracle_equivalence),
        ("5 normalization and marginals", normalization),
        ("6 Monte Carlo consistency", mc_consistency),
        ("7 no false violations", no_false_violations),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += !o.pass as u32;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() as u32 - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
