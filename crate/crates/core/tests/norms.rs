use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structune::linalg::sigma_max;
use structune::norms::{gramians, h2_norm, hinf_norm, pole_region_violation, PoleGoal};
use structune::oracle::{h2_quadrature, hinf_grid, random_stable};
use structune::ss::{Spectrum, StateSpace};
use structune::Error;

fn systems(seed: u64, count: usize, proper: bool) -> Vec<StateSpace<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let nx = rng.random_range(1..=8);
            let nu = rng.random_range(1..=3);
            let ny = rng.random_range(1..=3);
            let with_d = proper && rng.random_bool(0.5);
            random_stable(&mut rng, nx, nu, ny, with_d)
        })
        .collect()
}

#[test]
fn hinf_matches_brute_force_oracle() {
    for (i, g) in systems(2024, 50, true).iter().enumerate() {
        let fast = hinf_norm(g, 1e-8).unwrap();
        let (slow, w) = hinf_grid(g, 1e-3, 1e3, 100_000);
        let rel = (fast.value - slow).abs() / slow;
        assert!(rel <= 1e-4, "system {i}: {} vs {slow} at ω={w}", fast.value);
    }
}

#[test]
fn h2_matches_quadrature_oracle() {
    for (i, g) in systems(77, 50, false).iter().enumerate() {
        let fast = h2_norm(g).unwrap();
        let slow = h2_quadrature(g, 1e-12).unwrap();
        assert!(
            (fast - slow).abs() / slow <= 1e-4,
            "system {i}: {fast} vs {slow}"
        );
    }
}

#[test]
#[allow(clippy::approx_constant)]
fn analytic_values() {
    let lag = StateSpace::first_order(1.0f64, 1.0);
    let r = hinf_norm(&lag, 1e-8).unwrap();
    assert!((r.value - 1.0).abs() <= 1e-6);
    assert!(r.peak_frequencies[0].abs() <= 1e-6);
    assert!((h2_norm(&lag).unwrap() - 0.7071067812).abs() < 1e-9);
    assert!((h2_norm(&StateSpace::first_order(1.0f64, 2.0)).unwrap() - 0.5).abs() < 1e-12);

    let osc = StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[0.0f64, 1.0, -1.0, -0.1]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
    )
    .unwrap();
    let r = hinf_norm(&osc, 1e-8).unwrap();
    assert!((r.value - 10.01252).abs() / 10.01252 <= 1e-5, "{}", r.value);
    assert!((r.peak_frequencies[0] - 0.99750).abs() / 0.99750 <= 1e-5);

    let gain = StateSpace::gain(DMatrix::from_element(1, 1, 0.5));
    let r = hinf_norm(&gain, 1e-8).unwrap();
    assert_eq!(r.value, 0.5);
    assert_eq!(r.peak_frequencies, vec![0.0]);
}

#[test]
fn unstable_and_improper_inputs() {
    let up = StateSpace::first_order(1.0, -1.0);
    assert!(matches!(h2_norm(&up), Err(Error::Unstable(_))));
    assert!(matches!(hinf_norm(&up, 1e-8), Err(Error::Unstable(_))));
    let mut d = StateSpace::first_order(1.0, 1.0);
    d.d[(0, 0)] = 1.0;
    assert!(matches!(h2_norm(&d), Err(Error::NonzeroFeedthrough)));
}

#[test]
fn scaling_and_duality() {
    for (i, g) in systems(9, 20, false).iter().enumerate() {
        let h = hinf_norm(g, 1e-10).unwrap().value;
        let h2 = h2_norm(g).unwrap();
        for alpha in [-3.0, 0.25, 7.0] {
            let s = g.scaled(alpha);
            let hs = hinf_norm(&s, 1e-10).unwrap().value;
            assert!((hs - alpha.abs() * h).abs() <= 1e-8 * hs, "system {i}");
            let h2s = h2_norm(&s).unwrap();
            assert!((h2s - alpha.abs() * h2).abs() <= 1e-8 * h2s);
        }
        let gr = gramians(g).unwrap();
        let tc = (&g.c * &gr.controllability * g.c.transpose()).trace();
        let to = (g.b.transpose() * &gr.observability * &g.b).trace();
        assert!(
            (tc - to).abs() <= 1e-9 * tc.abs(),
            "system {i}: {tc} vs {to}"
        );
    }
}

#[test]
fn hinf_dominates_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for g in systems(12, 20, true) {
        let h = hinf_norm(&g, 1e-8).unwrap().value;
        for _ in 0..200 {
            let w = 10f64.powf(rng.random_range(-3.0..3.0));
            let s = sigma_max(&g.freq_response(w).unwrap());
            assert!(h >= s - 1e-8);
        }
        let peaks = hinf_norm(&g, 1e-8).unwrap().peak_frequencies;
        assert!(peaks.windows(2).all(|p| p[0] <= p[1]));
    }
}

#[test]
fn pole_examples() {
    let goal = PoleGoal::new(0.9, 0.9, 4.0).unwrap();
    let pair = Spectrum::from_eigenvalues(vec![
        Complex::new(-0.5f64, 0.8660254037844386),
        Complex::new(-0.5, -0.8660254037844386),
    ]);
    let (v, active) = pole_region_violation(&pair, &goal);
    assert!((v - 0.4).abs() < 1e-9);
    assert_eq!(active.len(), 2);
    let (v, _) = pole_region_violation(
        &Spectrum::from_eigenvalues(vec![Complex::new(-1.0781, 0.0)]),
        &goal,
    );
    assert!(v < 0.0);
}

fn spectrum_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0..1.0f64, 0.0..5.0f64), 1..6)
}

fn conj_spectrum(parts: &[(f64, f64)]) -> Spectrum<f64> {
    let mut eig = Vec::new();
    for &(re, im) in parts {
        eig.push(Complex::new(re, im));
        if im != 0.0 {
            eig.push(Complex::new(re, -im));
        }
    }
    Spectrum::from_eigenvalues(eig)
}

proptest! {
    #[test]
    fn pole_violation_conjugation_invariant(parts in spectrum_strategy(), a in 0.0..2.0f64, z in 0.0..0.99f64, w in 0.1..10.0f64) {
        let goal = PoleGoal::new(a, z, w).unwrap();
        let s = conj_spectrum(&parts);
        let flipped = Spectrum::from_eigenvalues(s.eigenvalues.iter().map(|e| e.conj()).collect());
        prop_assert_eq!(pole_region_violation(&s, &goal).0, pole_region_violation(&flipped, &goal).0);
    }

    #[test]
    fn pole_violation_monotone(parts in spectrum_strategy(), a in 0.0..2.0f64, z in 0.0..0.99f64, w in 0.1..10.0f64,
                               da in 0.0..1.0f64, dz in 0.0..1.0f64, dw in 0.0..5.0f64) {
        let s = conj_spectrum(&parts);
        let tight = PoleGoal::new(a, z, w).unwrap();
        let loose = PoleGoal::new((a - da).max(0.0), z * dz, w + dw).unwrap();
        prop_assert!(pole_region_violation(&s, &loose).0 <= pole_region_violation(&s, &tight).0);
    }
}
