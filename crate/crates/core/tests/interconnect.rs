use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structune::oracle::random_stable;
use structune::ss::{
    closed_pair, compose, lft_lower, star_product_response, ComposeMode, PartitionedPlant,
    StateSpace,
};
use structune::Error;

type C = Complex<f64>;

fn rel_err(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn lft_matches_star_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // w: 2, u: 1, z: 2, y: 2
    let full = random_stable(&mut rng, 4, 3, 4, true);
    let p = PartitionedPlant::from_state_space(&full, 1, 2).unwrap();
    let k = random_stable(&mut rng, 2, 2, 1, true).scaled(0.3);
    let cl = lft_lower(&p, &k).unwrap();
    for _ in 0..30 {
        let w = 10f64.powf(rng.random_range(-2.0..2.0));
        let got = cl.freq_response(w).unwrap();
        let want = star_product_response(
            &full.freq_response(w).unwrap(),
            &k.freq_response(w).unwrap(),
            2,
            2,
        )
        .unwrap();
        assert!(rel_err(&got, &want) <= 1e-10);
    }
}

#[test]
fn feedback_with_zero_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_stable(&mut rng, 3, 2, 2, true);
    let (t, _) = closed_pair(&m, &StateSpace::zero(2, 2)).unwrap();
    for i in 0..20 {
        let w = 0.05 * (i as f64 + 1.0).powi(2);
        assert!(rel_err(&t.freq_response(w).unwrap(), &m.freq_response(w).unwrap()) <= 1e-12);
    }
}

#[test]
fn block_diagonal_poles_are_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (n1, n2) = (rng.random_range(1..5), rng.random_range(1..5));
        let s1 = random_stable(&mut rng, n1, 1, 1, false);
        let s2 = random_stable(&mut rng, n2, 2, 1, false);
        let bd = compose(ComposeMode::BlockDiag, &[s1.clone(), s2.clone()]).unwrap();
        let mut got = bd.poles().unwrap().eigenvalues;
        let mut want = s1.poles().unwrap().eigenvalues;
        want.extend(s2.poles().unwrap().eigenvalues);
        let key = |z: &C| (z.re, z.im);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() <= 1e-8);
        }
    }
}

#[test]
fn lft_equals_feedback_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let mut full = random_stable(&mut rng, 3, 3, 3, true);
        // w: 2, u: 1, z: 1, y: 2 with D₂₂ = 0
        full.d.view_mut((1, 2), (2, 1)).fill(0.0);
        let p = PartitionedPlant::from_state_space(&full, 1, 2).unwrap();
        let k = random_stable(&mut rng, 1, 2, 1, true);
        let cl = lft_lower(&p, &k).unwrap();
        // F_l(P, K) = P₁₁ + P₁₂ · feedback(K, −P₂₂) · P₂₁
        let p11 = full.channel(&[0, 1], &[0]).unwrap();
        let p12 = full.channel(&[2], &[0]).unwrap();
        let p21 = full.channel(&[0, 1], &[1, 2]).unwrap();
        let p22 = full.channel(&[2], &[1, 2]).unwrap();
        let (kfb, _) = closed_pair(&k, &p22.scaled(-1.0)).unwrap();
        let path = compose(ComposeMode::Series, &[p21, kfb, p12]).unwrap();
        let assembled = compose(ComposeMode::Sum, &[p11, path]).unwrap();
        for _ in 0..5 {
            let w = 10f64.powf(rng.random_range(-2.0..2.0));
            assert!(
                rel_err(
                    &cl.freq_response(w).unwrap(),
                    &assembled.freq_response(w).unwrap()
                ) <= 1e-9
            );
        }
    }
}

fn integrator_plant(d22: f64) -> PartitionedPlant<f64> {
    // ẋ = w + u, z = x, y = x
    PartitionedPlant::new(
        scalar(0.0),
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(0.0),
        scalar(0.0),
        scalar(0.0),
        scalar(d22),
    )
    .unwrap()
}

#[test]
fn lft_examples() {
    let p = integrator_plant(0.0);
    let open = lft_lower(&p, &StateSpace::zero(1, 1)).unwrap();
    assert_eq!(
        (
            open.a[(0, 0)],
            open.b[(0, 0)],
            open.c[(0, 0)],
            open.d[(0, 0)]
        ),
        (0.0, 1.0, 1.0, 0.0)
    );
    let kappa = 2.5;
    let cl = lft_lower(&p, &StateSpace::gain(scalar(-kappa))).unwrap();
    assert_eq!(cl.a[(0, 0)], -kappa);
    let g = cl.freq_response(1.0).unwrap()[(0, 0)];
    assert!((g - C::new(1.0, 0.0) / C::new(kappa, 1.0)).norm() < 1e-15);
    let bad = lft_lower(&integrator_plant(1.0), &StateSpace::gain(scalar(1.0)));
    assert!(matches!(bad, Err(Error::IllPosed)));
}

#[test]
fn feedback_and_response_examples() {
    let one = StateSpace::gain(scalar(1.0));
    let (t, sp) = closed_pair(&one, &one).unwrap();
    assert_eq!(t.d[(0, 0)], 0.5);
    assert!(sp.eigenvalues.is_empty());
    let lag = StateSpace::first_order(1.0f64, 1.0);
    assert!((lag.freq_response(0.0).unwrap()[(0, 0)].re - 1.0).abs() < 1e-15);
    let g1 = lag.freq_response(1.0).unwrap()[(0, 0)];
    assert!((g1 - C::new(0.5, -0.5)).norm() < 1e-15);
    assert!((g1.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    let gain = StateSpace::gain(DMatrix::from_row_slice(1, 2, &[3.0, -2.0]));
    assert_eq!(gain.freq_response(17.0).unwrap()[(0, 1)], C::new(-2.0, 0.0));
    let int = StateSpace::new(scalar(0.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
    assert!(matches!(
        int.freq_response(0.0),
        Err(Error::ResolventSingular(_))
    ));
}

#[test]
fn pole_examples() {
    let osc = StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]),
        DMatrix::zeros(2, 1),
        DMatrix::zeros(1, 2),
        scalar(0.0),
    )
    .unwrap();
    let sp = osc.poles().unwrap();
    assert!((sp.abscissa + 0.5).abs() < 1e-12);
    for z in &sp.eigenvalues {
        assert!((z.im.abs() - 0.8660254037844386).abs() < 1e-12);
    }
    let diag = StateSpace::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[-1.0, 2.0])),
        DMatrix::zeros(2, 1),
        DMatrix::zeros(1, 2),
        scalar(0.0),
    )
    .unwrap();
    assert_eq!(diag.poles().unwrap().abscissa, 2.0);
    assert_eq!(
        StateSpace::first_order(1.0, 1.0).poles().unwrap().abscissa,
        -1.0
    );
}

#[test]
fn compose_examples() {
    let a = StateSpace::first_order(1.0f64, 1.0);
    let b = StateSpace::first_order(1.0, 2.0);
    let bd = compose(ComposeMode::BlockDiag, &[a.clone(), b.clone()]).unwrap();
    assert_eq!((bd.nx(), bd.nu(), bd.ny()), (2, 2, 2));
    assert_eq!(bd.a[(0, 1)], 0.0);
    let s = compose(ComposeMode::Series, &[a, b]).unwrap();
    assert!((s.freq_response(0.0).unwrap()[(0, 0)].re - 0.5).abs() < 1e-15);
    let k0 = StateSpace::gain(DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]));
    let k = StateSpace::gain(DMatrix::from_row_slice(1, 3, &[-1.049, -1.049, -0.05402]));
    let sum = compose(ComposeMode::Sum, &[k0, k]).unwrap();
    assert_eq!(sum.d.as_slice(), &[-1.049, -1.049, 1.0 - 0.05402]);
    let mismatch = compose(
        ComposeMode::Sum,
        &[StateSpace::<f64>::zero(1, 2), StateSpace::zero(1, 3)],
    );
    assert!(matches!(mismatch, Err(Error::DimensionMismatch(_))));
}
