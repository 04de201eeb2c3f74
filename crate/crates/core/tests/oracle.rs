//! The number-basis model against the phase-space closed forms.

use nopa_bell::analytics::{nocount_joint, nocount_single_a, nocount_single_b, parity_correlation};
use nopa_bell::bell::{ch_general, chsh_combination, BellSettings};
use nopa_bell::fock::FockConfig;
use nopa_bell::{ComplexAmplitude, PhasePoint, SqueezingParam};
use proptest::prelude::*;

fn disc(radius: f64) -> impl Strategy<Value = ComplexAmplitude> {
    (0.0..=radius, 0.0..std::f64::consts::TAU)
        .prop_map(|(rho, phi): (f64, f64)| ComplexAmplitude::new(rho * phi.cos(), rho * phi.sin()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_distribution_reproduces_closed_forms(
        r in 0.0..1.5f64,
        alpha in disc(2.0),
        beta in disc(2.0),
    ) {
        let r = SqueezingParam::new(r).unwrap();
        let dist = FockConfig::default().distribution(r, alpha, beta).unwrap();
        let p = PhasePoint::new(alpha, beta);
        prop_assert!((dist.parity_expectation() - parity_correlation(r, p).unwrap()).abs() < 1e-8);
        prop_assert!((dist.nocount_joint() - nocount_joint(r, p).unwrap()).abs() < 1e-8);
        prop_assert!((dist.nocount_a() - nocount_single_a(r, alpha).unwrap()).abs() < 1e-8);
        prop_assert!((dist.nocount_b() - nocount_single_b(r, beta).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn bell_combinations_from_number_basis() {
    let r = SqueezingParam::new(0.8).unwrap();
    let s = BellSettings {
        alpha: "0.3-0.1i".parse().unwrap(),
        alpha_prime: "-0.05+0.02i".parse().unwrap(),
        beta: "-0.35+0.1i".parse().unwrap(),
        beta_prime: "0.04+0i".parse().unwrap(),
    };
    let cfg = FockConfig::default();
    let dists: Vec<_> = s.joint_points().iter().map(|p| cfg.distribution(r, p.alpha, p.beta).unwrap()).collect();
    let signs = [1.0, 1.0, 1.0, -1.0];
    let b: f64 = dists.iter().zip(signs).map(|(d, s)| s * d.parity_expectation()).sum();
    let ch: f64 = dists.iter().zip(signs).map(|(d, s)| s * d.nocount_joint()).sum::<f64>()
        - dists[0].nocount_a()
        - dists[0].nocount_b();
    assert!((b - chsh_combination(r, &s).unwrap()).abs() < 1e-9);
    assert!((ch - ch_general(r, &s).unwrap()).abs() < 1e-9);
}
