use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structune::delay::wave::{feedback_through_phi, gain_system, ghat_network};
use structune::delay::{
    build_gtilde, build_phi, closed_loop_network, decomposition_residual, k0, phi_response,
    recover_controller, simulate_network, simulate_wave_pde, Reference, WaveScenario,
};
use structune::ss::closed_pair;
use structune::structure::{assemble, StructureSpec};
use structune::{ParamVector64, StateSpace64};

const NOMINAL: [f64; 3] = [-1.049, -1.049, -0.05402];
const K1: [f64; 3] = [-0.1102, -0.1102, -0.1053];
const K2: [f64; 3] = [0.03901, 0.03901, 0.02855];

fn scheduled(q: f64) -> StateSpace64 {
    let spec = StructureSpec::PolynomialScheduled {
        base: DMatrix::from_row_slice(1, 3, &NOMINAL),
        degree: 2,
        q0: 3.0,
    };
    let x: Vec<f64> = K1.iter().chain(K2.iter()).copied().collect();
    let p = ParamVector64::new(DVector::from_vec(x), spec.default_bounds()).unwrap();
    assemble(&spec, &p, Some(q)).unwrap()
}

fn rel(a: Complex<f64>, b: Complex<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn decomposition_identity_on_imaginary_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in [2.0, 3.0, 4.0] {
        for _ in 0..20 {
            let w: f64 = rng.random_range(0.05..20.0);
            let r = decomposition_residual(q, Complex::new(0.0, w)).unwrap();
            assert!(r <= 1e-9, "q={q} ω={w} residual {r}");
        }
    }
}

#[test]
fn phi_network_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for q in [0.5, 2.0, 3.0] {
        let net = build_phi(q).unwrap();
        for _ in 0..10 {
            let s = Complex::new(rng.random_range(-0.5..1.0), rng.random_range(-10.0..10.0));
            let h = net.frequency_response(s).unwrap();
            let exact = phi_response(q, s).unwrap();
            for i in 0..3 {
                assert!(rel(h[(i, 0)], exact[i]) <= 1e-10);
            }
        }
    }
}

#[test]
fn phi_step_response_is_bounded() {
    let net = build_phi(3.0).unwrap();
    let tr = simulate_network(&net, &|_| DVector::from_element(1, 1.0), 0.01, 100.0).unwrap();
    let peak = tr
        .values
        .iter()
        .flat_map(|v| v.iter().map(|x: &f64| x.abs()))
        .fold(0.0, f64::max);
    assert!(peak.is_finite() && peak < 10.0, "{peak}");
    // the integrator entries settle once both delays have elapsed
    let last = tr.values.last().unwrap();
    let at_5 = &tr.values[500];
    assert!((last - at_5).norm() < 1e-9);
}

/// Loop of `P` (input ν, outputs y) closed by `ν = K(d − y)`: transfer from
/// the measurement disturbance `d` to `ν`.
fn loop_response(p: &DMatrix<Complex<f64>>, k: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let n = k.nrows();
    (DMatrix::identity(n, n) + k * p).try_inverse().unwrap() * k
}

fn max_rel(a: &DMatrix<Complex<f64>>, b: &DMatrix<Complex<f64>>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| rel(*x, *y))
        .fold(0.0, f64::max)
}

#[test]
fn loop_transformation_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let q = 3.0;
    let kt = gain_system(&NOMINAL);
    let ghat = ghat_network(q).unwrap();
    let gt = build_gtilde(q).unwrap();
    let k_net = feedback_through_phi(&kt, q).unwrap();
    let any_k = DMatrix::from_row_slice(1, 3, &[0.3, -0.7, 0.2]).map(|v| Complex::new(v, 0.0));
    for _ in 0..20 {
        let s = Complex::new(0.0, rng.random_range(0.05..30.0));
        let gh = ghat.frequency_response(s).unwrap();
        let g = gt.eval(s).unwrap();
        // recovered controller on G̃ + Φ reproduces the (G̃, K̃) loop
        let lhs = loop_response(&gh, &k_net.frequency_response(s).unwrap());
        let rhs = loop_response(&g, &kt.eval(s).unwrap());
        assert!(max_rel(&lhs, &rhs) <= 1e-8);
        // (G̃ + Φ, K) against (G̃, feedback(K, Φ)) for an arbitrary gain
        let phi = DMatrix::from_column_slice(3, 1, phi_response(q, s).unwrap().as_slice());
        let fb = (DMatrix::<Complex<f64>>::identity(1, 1) + &any_k * &phi)
            .try_inverse()
            .unwrap()
            * &any_k;
        let lhs = loop_response(&gh, &any_k);
        let rhs = loop_response(&g, &fb);
        assert!(max_rel(&lhs, &rhs) <= 1e-8);
    }
}

#[test]
fn recovered_controller_against_hand_evaluation() {
    let q = 3.0;
    let kt = gain_system(&NOMINAL);
    let net = recover_controller(&kt, q).unwrap();
    let s = Complex::new(0.0, 1.0);
    let kr = DMatrix::from_row_slice(1, 3, &NOMINAL).map(|v| Complex::new(v, 0.0));
    let phi = DMatrix::from_column_slice(3, 1, phi_response(q, s).unwrap().as_slice());
    let inner = (DMatrix::<Complex<f64>>::identity(1, 1) - &kr * &phi)
        .try_inverse()
        .unwrap();
    let expected = k0::<f64>().map(|v| Complex::new(v, 0.0)) + &inner * &kr;
    let got = net.frequency_response(s).unwrap();
    for i in 0..3 {
        assert!(rel(got[(0, i)], expected[(0, i)]) <= 1e-9);
    }
}

#[test]
fn schedules_coincide_at_nominal_point() {
    let k2 = scheduled(3.0);
    assert_eq!(k2.d, gain_system(&NOMINAL).d);
    let a = recover_controller(&k2, 3.0).unwrap();
    let b = recover_controller(&gain_system(&NOMINAL), 3.0).unwrap();
    let s = Complex::new(0.1, 2.0);
    assert_eq!(
        a.frequency_response(s).unwrap(),
        b.frequency_response(s).unwrap()
    );
}

#[test]
fn frozen_scheduled_poles() {
    for (q, pole) in [(2.0, -1.7305), (3.0, -1.0781), (4.0, -0.7990)] {
        let (_, sp) = closed_pair(&build_gtilde(q).unwrap(), &scheduled(q)).unwrap();
        assert_eq!(sp.eigenvalues.len(), 1);
        assert!(
            (sp.eigenvalues[0].re - pole).abs() <= 1e-3,
            "q={q}: {}",
            sp.eigenvalues[0]
        );
    }
}

fn cross_validate(k: &StateSpace64, q: f64) -> f64 {
    let n = 400;
    let horizon = 20.0;
    let reference = Reference::SmoothStep {
        amplitude: 1.0,
        rise: 1.0,
    };
    let sc = WaveScenario::at_rest(q, n, horizon, reference);
    let ctrl = recover_controller(k, q).unwrap();
    let (pde, _) = simulate_wave_pde(&sc, &ctrl).unwrap();
    let net = closed_loop_network(k, q).unwrap();
    let dt = 1.0 / n as f64;
    let tr = simulate_network(
        &net,
        &|t| DVector::from_element(1, reference.at(t)),
        dt,
        horizon,
    )
    .unwrap();
    assert_eq!(tr.t.len(), pde.t.len());
    let mut worst = 0.0f64;
    for (a, b) in pde.values.iter().zip(&tr.values) {
        for c in 0..4 {
            worst = worst.max((a[c] - b[c]).abs());
        }
    }
    worst
}

#[test]
fn pde_and_network_simulations_agree() {
    let err = cross_validate(&gain_system(&NOMINAL), 3.0);
    assert!(err <= 1e-3, "max abs error {err}");
}

#[test]
fn scheduled_loops_agree_across_q() {
    for q in [2.0, 4.0] {
        let err = cross_validate(&scheduled(q), q);
        assert!(err <= 1e-3, "q={q}: max abs error {err}");
    }
}

#[test]
fn published_gain_loop_settles() {
    let q = 3.0;
    let sc = WaveScenario::at_rest(q, 400, 40.0, Reference::Step { amplitude: 1.0 });
    let ctrl = recover_controller(&gain_system(&NOMINAL), q).unwrap();
    let (tr, _) = simulate_wave_pde(&sc, &ctrl).unwrap();
    let y3 = tr.column(2);
    assert!(y3.iter().all(|v| v.abs() < 100.0));
    let tail = &y3[y3.len() - 800..];
    let spread =
        tail.iter().fold(f64::MIN, |a, &b| a.max(b)) - tail.iter().fold(f64::MAX, |a, &b| a.min(b));
    assert!(spread < 1e-2, "y3 still moving: {spread}");
}
