//! Wave equation with anti-stable boundary damping,
//!
//! ```text
//! x_tt = x_ξξ on [0, 1],  x_ξ(0, t) = −q x_t(0, t),  x_ξ(1, t) = u(t),
//! y = (x(0, t), x(1, t), x_t(1, t)),
//! ```
//!
//! prestabilized by `u = v − y₃` and split as `Ĝ = G̃ + Φ` into a one-state
//! unstable rational part and a stable part built from delays.

use nalgebra::{Complex, ComplexField, DMatrix};

use super::network::{ext, port, scale, sum, BlockKind, DelayNetwork, Signal};
use crate::linalg::CVector;
use crate::ss::{lft_lower, PartitionedPlant, StateSpace};
use crate::{lit, Error, Real, Result};

/// `Q = (1 + q)/(1 − q)`.
pub fn q_factor<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero()) || !q.is_finite() {
        return Err(Error::InvalidArgument("q must be positive".into()));
    }
    let den = T::one() - q;
    if den.abs() <= lit::<T>(1e-12) {
        return Err(Error::QEqualsOne);
    }
    Ok((T::one() + q) / den)
}

/// Prestabilizing gain `K₀ = [0 0 1]`.
pub fn k0<T: Real>() -> DMatrix<T> {
    DMatrix::from_row_slice(1, 3, &[T::zero(), T::zero(), T::one()])
}

/// Rational part `G̃(q) = [1/(s(1−q)); 1/(s(1−q)); 1/2]`.
pub fn build_gtilde<T: Real>(q: T) -> Result<StateSpace<T>> {
    q_factor(q)?;
    let c = T::one() / (T::one() - q);
    StateSpace::new(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, T::one()),
        DMatrix::from_column_slice(3, 1, &[c, c, T::zero()]),
        DMatrix::from_column_slice(3, 1, &[T::zero(), T::zero(), lit(0.5)]),
    )
}

/// Delay part `Φ(q)`:
/// `[−(1−e^{−s})/(s(1−q)); −Q(1−e^{−2s})/(2s); (Q/2)e^{−2s}]`.
pub fn build_phi<T: Real>(q: T) -> Result<DelayNetwork<T>> {
    let big_q = q_factor(q)?;
    let half_q = big_q * lit(0.5);
    let integrator = |gain: T| {
        StateSpace::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, T::one()),
            DMatrix::from_element(1, 1, gain),
            DMatrix::zeros(1, 1),
        )
    };
    let mut net = DelayNetwork::new(["u"]);
    let d1 = net.add_block(
        "delay1",
        BlockKind::Delay {
            theta: T::one(),
            width: 1,
        },
    );
    let d2 = net.add_block(
        "delay2",
        BlockKind::Delay {
            theta: lit(2.0),
            width: 1,
        },
    );
    let i1 = net.add_block(
        "int1",
        BlockKind::Rational(integrator(-T::one() / (T::one() - q))?),
    );
    let i2 = net.add_block("int2", BlockKind::Rational(integrator(-half_q)?));
    net.connect(d1, 0, ext(0));
    net.connect(d2, 0, ext(0));
    net.connect(i1, 0, sum(&[ext(0), scale(&port(d1, 0), -T::one())]));
    net.connect(i2, 0, sum(&[ext(0), scale(&port(d2, 0), -T::one())]));
    net.add_output("phi1", port(i1, 0));
    net.add_output("phi2", port(i2, 0));
    net.add_output("phi3", scale(&port(d2, 0), half_q));
    Ok(net)
}

/// Closed-form `Φ(q, s)` (limits taken at `s = 0`).
pub fn phi_response<T: Real>(q: T, s: Complex<T>) -> Result<CVector<T>> {
    let big_q = Complex::from(q_factor(q)?);
    let one = Complex::from(T::one());
    let half = Complex::from(lit::<T>(0.5));
    let den = Complex::from(T::one() - q);
    let e1 = ComplexField::exp(-s);
    let e2 = e1 * e1;
    // (1 − e^{−θs})/s
    let window = |theta: T| {
        if s.modulus() < lit(1e-8) {
            Complex::from(theta) - s * Complex::from(theta * theta * lit(0.5))
        } else {
            (one - ComplexField::exp(-s * Complex::from(theta))) / s
        }
    };
    Ok(CVector::from_vec(vec![
        -window(T::one()) / den,
        -big_q * window(lit(2.0)) * half,
        big_q * half * e2,
    ]))
}

/// `G(ξ, s) = x(ξ, s)/u(s)` of the open-loop wave equation.
pub fn wave_transfer<T: Real>(q: T, xi: T, s: Complex<T>) -> Result<Complex<T>> {
    q_factor(q)?;
    let a = Complex::from(T::one() - q);
    let b = Complex::from(T::one() + q);
    let xs = s * Complex::from(xi);
    let num = a * ComplexField::exp(xs) + b * ComplexField::exp(-xs);
    let den = a * ComplexField::exp(s) - b * ComplexField::exp(-s);
    Ok(num / (den * s))
}

/// `Ĝ = G/(1 + G₃)` with `G = [G(0, s); G(1, s); s G(1, s)]`.
pub fn ghat_closed_form<T: Real>(q: T, s: Complex<T>) -> Result<CVector<T>> {
    let g0 = wave_transfer(q, T::zero(), s)?;
    let g1 = wave_transfer(q, T::one(), s)?;
    let g3 = s * g1;
    let k = Complex::from(T::one()) + g3;
    Ok(CVector::from_vec(vec![g0 / k, g1 / k, g3 / k]))
}

/// Plant for tuning a static `K̃` on `G̃(q)` in negative feedback
/// (`u = −K̃ y`), written for `lft_lower`'s `u = K y` convention by negating
/// the measurement. No performance channels.
pub fn wave_plant<T: Real>(q: T) -> Result<PartitionedPlant<T>> {
    let g = build_gtilde(q)?;
    PartitionedPlant::new(
        g.a.clone(),
        DMatrix::zeros(1, 0),
        g.b.clone(),
        DMatrix::zeros(0, 1),
        -&g.c,
        DMatrix::zeros(0, 0),
        DMatrix::zeros(0, 1),
        DMatrix::zeros(3, 0),
        -&g.d,
    )
}

fn block_for<T: Real>(k: &StateSpace<T>) -> BlockKind<T> {
    if k.nx() == 0 {
        BlockKind::Gain(k.d.clone())
    } else {
        BlockKind::Rational(k.clone())
    }
}

/// `K = feedback(K̃, −Φ(q)) = K̃(I − ΦK̃)⁻¹`: `v = K̃(y + Φ v)`.
pub fn feedback_through_phi<T: Real>(k_tilde: &StateSpace<T>, q: T) -> Result<DelayNetwork<T>> {
    if k_tilde.nu() != 3 || k_tilde.ny() != 1 {
        return Err(Error::DimensionMismatch(
            "K̃ must map 3 measurements to 1 control".into(),
        ));
    }
    let phi = build_phi(q)?;
    let mut net = DelayNetwork::new(["y1", "y2", "y3"]);
    let kb = net.add_block("k_tilde", block_for(k_tilde));
    let phi_out = net.embed(&phi, &[port(kb, 0)])?;
    for (i, p) in phi_out.iter().enumerate() {
        net.connect(kb, i, sum(&[ext(i), p.clone()]));
    }
    net.add_output("v", port(kb, 0));
    net.validate()?;
    Ok(net)
}

/// Overall implementable controller `K* = K₀ + feedback(K̃, −Φ(q))`,
/// applied as `u = r − K* y`.
pub fn recover_controller<T: Real>(k_tilde: &StateSpace<T>, q: T) -> Result<DelayNetwork<T>> {
    let mut net = feedback_through_phi(k_tilde, q)?;
    let v = net.outputs.pop().unwrap_or_default();
    net.output_names.pop();
    let k0 = k0::<T>();
    let mut out: Signal<T> = v;
    for i in 0..3 {
        if k0[(0, i)] != T::zero() {
            out.extend(scale(&ext(i), k0[(0, i)]));
        }
    }
    net.add_output("u_k", out);
    Ok(net)
}

/// Closed loop of the prestabilized plant `G̃ + Φ` with the recovered
/// controller, driven by `r` added at the plant input. The static loop
/// through the feedthrough of `G̃` and `K̃` is solved once and merged into a
/// single rational block; every remaining cycle runs through `Φ`.
/// Outputs: `y1, y2, y3, u` with `u = ν − y₃` the boundary control.
pub fn closed_loop_network<T: Real>(k_tilde: &StateSpace<T>, q: T) -> Result<DelayNetwork<T>> {
    let g = build_gtilde(q)?;
    let nk = k_tilde.nx();
    if k_tilde.nu() != 3 || k_tilde.ny() != 1 {
        return Err(Error::DimensionMismatch(
            "K̃ must map 3 measurements to 1 control".into(),
        ));
    }
    // exogenous w = (r, a₁..a₃, b₁..b₃): a = Φν enters y, b = Φv enters the
    // controller input; controlled output z = (ν, v, y₁, y₂, y₃)
    let nx = g.nx();
    let mut b1 = DMatrix::zeros(nx, 7);
    b1.column_mut(0).copy_from(&g.b.column(0));
    let mut c1 = DMatrix::zeros(5, nx);
    c1.rows_mut(2, 3).copy_from(&g.c);
    let mut d11 = DMatrix::zeros(5, 7);
    d11[(0, 0)] = T::one();
    for i in 0..3 {
        d11[(2 + i, 0)] = g.d[(i, 0)];
        d11[(2 + i, 1 + i)] = T::one();
    }
    let mut d12 = DMatrix::zeros(5, 1);
    d12[(0, 0)] = -T::one();
    d12[(1, 0)] = T::one();
    for i in 0..3 {
        d12[(2 + i, 0)] = -g.d[(i, 0)];
    }
    let mut d21 = DMatrix::zeros(3, 7);
    for i in 0..3 {
        d21[(i, 0)] = g.d[(i, 0)];
        d21[(i, 1 + i)] = T::one();
        d21[(i, 4 + i)] = T::one();
    }
    let plant = PartitionedPlant::new(
        g.a.clone(),
        b1,
        -&g.b,
        c1,
        g.c.clone(),
        d11,
        d12,
        d21,
        -&g.d,
    )?;
    let rational = lft_lower(&plant, k_tilde)?;
    debug_assert_eq!(rational.nx(), nx + nk);

    let phi = build_phi(q)?;
    let mut net = DelayNetwork::new(["r"]);
    let rb = net.add_block("loop", BlockKind::Rational(rational));
    let phi_plant = net.embed(&phi, &[port(rb, 0)])?;
    let phi_ctrl = net.embed(&phi, &[port(rb, 1)])?;
    net.connect(rb, 0, ext(0));
    for i in 0..3 {
        net.connect(rb, 1 + i, phi_plant[i].clone());
        net.connect(rb, 4 + i, phi_ctrl[i].clone());
    }
    net.add_output("y1", port(rb, 2));
    net.add_output("y2", port(rb, 3));
    net.add_output("y3", port(rb, 4));
    net.add_output("u", sum(&[port(rb, 0), scale(&port(rb, 4), -T::one())]));
    net.validate()?;
    Ok(net)
}

/// Prestabilized plant `Ĝ = G̃ + Φ` as a network (input `ν`, outputs `y`).
pub fn ghat_network<T: Real>(q: T) -> Result<DelayNetwork<T>> {
    let g = build_gtilde(q)?;
    let phi = build_phi(q)?;
    let mut net = DelayNetwork::new(["v"]);
    let gb = net.add_block("gtilde", BlockKind::Rational(g));
    net.connect(gb, 0, ext(0));
    let p = net.embed(&phi, &[ext(0)])?;
    for (i, name) in ["y1", "y2", "y3"].iter().enumerate() {
        net.add_output(*name, sum(&[port(gb, i), p[i].clone()]));
    }
    Ok(net)
}

/// Transfer of the static schedule `K̃(q)` evaluated as a column gain.
pub fn gain_system<T: Real>(k: &[T]) -> StateSpace<T> {
    StateSpace::gain(DMatrix::from_row_slice(1, k.len(), k))
}

/// Closed-form check that `G̃ + Φ = Ĝ` at `s`; returns the largest relative
/// deviation over the three channels.
pub fn decomposition_residual<T: Real>(q: T, s: Complex<T>) -> Result<T> {
    let g = build_gtilde(q)?.eval(s)?;
    let phi = phi_response(q, s)?;
    let exact = ghat_closed_form(q, s)?;
    let mut worst = T::zero();
    for i in 0..3 {
        let d = (g[(i, 0)] + phi[i] - exact[i]).modulus();
        worst = worst.max(d / exact[i].modulus().max(lit(1e-300)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ss::closed_pair;

    fn published_nominal() -> StateSpace<f64> {
        gain_system(&[-1.049, -1.049, -0.05402])
    }

    #[test]
    fn gtilde_entries() {
        let g3 = build_gtilde(3.0).unwrap();
        assert_eq!(g3.c.as_slice(), &[-0.5, -0.5, 0.0]);
        assert_eq!(g3.d[(2, 0)], 0.5);
        let g2 = build_gtilde(2.0).unwrap();
        assert_eq!(g2.c[(0, 0)], -1.0);
        assert!(matches!(build_gtilde(1.0), Err(Error::QEqualsOne)));
        assert!(matches!(build_phi(1.0), Err(Error::QEqualsOne)));
    }

    #[test]
    fn phi_network_matches_closed_form() {
        let s = Complex::new(0.0, 0.7);
        let net = build_phi(3.0).unwrap().frequency_response(s).unwrap();
        let exact = phi_response(3.0, s).unwrap();
        for i in 0..3 {
            assert!((net[(i, 0)] - exact[i]).norm() < 1e-10);
        }
        let dc = phi_response(3.0, Complex::new(0.0, 0.0)).unwrap();
        assert!((dc[0].re + 1.0 / (1.0 - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity() {
        for &w in &[0.3, 1.0, 2.7, 9.1] {
            assert!(decomposition_residual(3.0, Complex::new(0.0, w)).unwrap() < 1e-9);
        }
    }

    #[test]
    fn published_gain_pole() {
        let (_, sp) = closed_pair(&build_gtilde(3.0).unwrap(), &published_nominal()).unwrap();
        assert_eq!(sp.eigenvalues.len(), 1);
        assert!((sp.eigenvalues[0].re + 1.0781).abs() < 1e-3);
        let clp = lft_lower(&wave_plant(3.0).unwrap(), &published_nominal()).unwrap();
        assert!((clp.a[(0, 0)] - sp.eigenvalues[0].re).abs() < 1e-12);
    }

    #[test]
    fn recovered_controller_response() {
        let q = 3.0;
        let s = Complex::new(0.0, 1.0);
        let kt = published_nominal();
        let net = recover_controller(&kt, q)
            .unwrap()
            .frequency_response(s)
            .unwrap();
        let phi = phi_response(q, s).unwrap();
        let ktc = crate::linalg::to_complex(&kt.d);
        let phic = nalgebra::DMatrix::from_column_slice(3, 1, phi.as_slice());
        let inner = (nalgebra::DMatrix::identity(3, 3) - &phic * &ktc)
            .try_inverse()
            .unwrap();
        let want = crate::linalg::to_complex(&k0::<f64>()) + &ktc * inner;
        assert!((net - &want).norm() / want.norm() < 1e-9);
    }
}
