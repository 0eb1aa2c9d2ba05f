use nalgebra::DVector;
use proptest::prelude::*;

use structune::bundle::{
    model_planes, run, tangent_step, BundleOptions, BundleStatus, Cut, OracleSample,
};
use structune::structure::Bound;
use structune::Result;

fn free(n: usize) -> Vec<Bound<f64>> {
    vec![Bound::default(); n]
}

fn abs_sum(x: &DVector<f64>) -> Result<OracleSample<f64>> {
    let v = x[0].abs() + 2.0 * x[1].abs();
    let g = DVector::from_row_slice(&[x[0].signum(), 2.0 * x[1].signum()]);
    Ok(OracleSample::new(x.clone(), v, vec![g]))
}

fn parabolas(x: &DVector<f64>) -> Result<OracleSample<f64>> {
    let (a, b) = (x[0] * x[0], (x[0] - 2.0) * (x[0] - 2.0));
    let mut grads = Vec::new();
    if a >= b - 1e-12 {
        grads.push(DVector::from_element(1, 2.0 * x[0]));
    }
    if b >= a - 1e-12 {
        grads.push(DVector::from_element(1, 2.0 * (x[0] - 2.0)));
    }
    Ok(OracleSample::new(x.clone(), a.max(b), grads))
}

fn strictly_decreasing(values: &[f64], start: f64) -> bool {
    let mut prev = start;
    values.iter().all(|&v| {
        let ok = v < prev;
        prev = v;
        ok
    })
}

#[test]
fn separable_kinks_reach_origin() {
    let mut o = abs_sum;
    let x0 = DVector::from_row_slice(&[3.0, -2.0]);
    let r = run(&mut o, &x0, &free(2), &BundleOptions::default()).unwrap();
    assert_eq!(r.status, BundleStatus::Converged);
    assert!(r.value <= 1e-6 && r.x.norm() <= 1e-6);
    assert!(r.certificate <= 1e-5, "certificate {}", r.certificate);
    let vals: Vec<f64> = r.history.iter().map(|h| h.value).collect();
    assert!(strictly_decreasing(&vals, 7.0));
}

#[test]
fn equalizer_of_parabolas() {
    let mut o = parabolas;
    let r = run(
        &mut o,
        &DVector::from_element(1, 5.0),
        &free(1),
        &BundleOptions::default(),
    )
    .unwrap();
    assert_eq!(r.status, BundleStatus::Converged);
    assert!((r.x[0] - 1.0).abs() <= 1e-6);
    assert!((r.value - 1.0).abs() <= 1e-6);
    assert!(r.certificate <= 1e-5, "certificate {}", r.certificate);
    let vals: Vec<f64> = r.history.iter().map(|h| h.value).collect();
    assert!(strictly_decreasing(&vals, 25.0));
}

#[test]
fn banana_from_classic_start() {
    let mut o = |x: &DVector<f64>| -> Result<OracleSample<f64>> {
        let (a, b) = (x[0], x[1]);
        let v = 100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2);
        let g = DVector::from_row_slice(&[
            -400.0 * a * (b - a * a) - 2.0 * (1.0 - a),
            200.0 * (b - a * a),
        ]);
        Ok(OracleSample::new(x.clone(), v, vec![g]))
    };
    let opts = BundleOptions::default();
    let r = run(
        &mut o,
        &DVector::from_row_slice(&[-1.2, 1.0]),
        &free(2),
        &opts,
    )
    .unwrap();
    assert!(r.history.len() <= opts.max_serious);
    assert!(
        r.value <= 1e-6,
        "f* = {} after {} serious steps ({:?})",
        r.value,
        r.history.len(),
        r.status
    );
}

#[test]
fn quadratic_first_trial_is_accepted() {
    let mut calls = 0;
    let mut o = |x: &DVector<f64>| -> Result<OracleSample<f64>> {
        calls += 1;
        Ok(OracleSample::new(
            x.clone(),
            0.5 * x[0] * x[0],
            vec![DVector::from_element(1, x[0])],
        ))
    };
    let r = run(
        &mut o,
        &DVector::from_element(1, 1.0),
        &free(1),
        &BundleOptions::default(),
    )
    .unwrap();
    assert_eq!(r.history[0].index, 1);
    // τ₀ = 1 gives the exact minimizer, ρ = 1
    assert_eq!(r.history[0].value, 0.0);
    assert!(calls <= 3);
}

#[test]
fn large_tau_shrinks_step() {
    let x = DVector::from_row_slice(&[0.3, -0.4]);
    let planes = vec![
        (1.0, DVector::from_row_slice(&[1.0, 2.0])),
        (0.9, DVector::from_row_slice(&[-1.0, 0.5])),
    ];
    let near = tangent_step(&planes, &x, 1e10, &free(2)).unwrap();
    assert!((&near.y - &x).norm() < 1e-9);
}

proptest! {
    #[test]
    fn single_plane_step_is_antiparallel(g0 in -5.0..5.0f64, g1 in -5.0..5.0f64, tau in 0.1..100.0f64) {
        prop_assume!(g0.abs() + g1.abs() > 1e-3);
        let x = DVector::from_row_slice(&[0.7, -0.2]);
        let g = DVector::from_row_slice(&[g0, g1]);
        let s = tangent_step(&[(1.0, g.clone())], &x, tau, &free(2)).unwrap();
        let d = &s.y - &x;
        let cross = d[0] * g[1] - d[1] * g[0];
        prop_assert!(cross.abs() <= 1e-10 * d.norm() * g.norm());
        prop_assert!(d.dot(&g) < 0.0);
    }

    #[test]
    fn downshifted_planes_stay_below_current_value(
        pts in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -5.0..5.0f64), 1..12),
        fx in -2.0..2.0f64,
    ) {
        let x = DVector::from_row_slice(&[0.1, -0.3]);
        let cuts: Vec<Cut<f64>> = pts
            .iter()
            .map(|&(z0, z1, g0, g1, v)| Cut { z: DVector::from_row_slice(&[z0, z1]), value: v, g: DVector::from_row_slice(&[g0, g1]) })
            .collect();
        for (intercept, _) in model_planes(&cuts, &x, fx, 1e-4) {
            prop_assert!(intercept <= fx + 1e-12);
        }
    }
}
