//! Leapfrog solver for the boundary-controlled wave equation at CFL 1.

use nalgebra::DVector;

use super::network::{step_signal, DelayNetwork, NetworkSim, Traces};
use super::wave::q_factor;
use crate::{lit, to_f64, Error, Real, Result};

/// Reference injected where the controller output is summed into `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference<T: Real> {
    Zero,
    /// `amplitude · H(t)` with `H(0) = 1/2`.
    Step {
        amplitude: T,
    },
    /// `C²` ramp from 0 to `amplitude` over `[0, rise]`.
    SmoothStep {
        amplitude: T,
        rise: T,
    },
}

impl<T: Real> Reference<T> {
    pub fn at(&self, t: T) -> T {
        match *self {
            Reference::Zero => T::zero(),
            Reference::Step { amplitude } => amplitude * step_signal(t),
            Reference::SmoothStep { amplitude, rise } => {
                if t <= T::zero() {
                    T::zero()
                } else if t >= rise {
                    amplitude
                } else {
                    let s = t / rise;
                    // 10 s³ − 15 s⁴ + 6 s⁵
                    amplitude
                        * s
                        * s
                        * s
                        * (lit::<T>(10.0) + s * (lit::<T>(-15.0) + s * lit::<T>(6.0)))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveScenario<T: Real> {
    pub q: T,
    /// Number of grid intervals `N` (so `Δξ = Δt = 1/N`).
    pub n: usize,
    pub horizon: T,
    /// Displacement on the `N + 1` nodes at `t = 0`.
    pub displacement: Vec<T>,
    /// Velocity on the `N + 1` nodes at `t = 0`.
    pub velocity: Vec<T>,
    pub reference: Reference<T>,
    /// `Δt/Δξ`; only 1 is accepted.
    pub cfl: T,
}

impl<T: Real> WaveScenario<T> {
    pub fn at_rest(q: T, n: usize, horizon: T, reference: Reference<T>) -> Self {
        Self {
            q,
            n,
            horizon,
            displacement: vec![T::zero(); n + 1],
            velocity: vec![T::zero(); n + 1],
            reference,
            cfl: T::one(),
        }
    }

    pub fn with_profile(mut self, x0: impl Fn(T) -> T, v0: impl Fn(T) -> T) -> Self {
        let h = T::one() / lit(self.n as f64);
        for i in 0..=self.n {
            let xi = h * lit(i as f64);
            self.displacement[i] = x0(xi);
            self.velocity[i] = v0(xi);
        }
        self
    }

    pub fn dt(&self) -> T {
        T::one() / lit(self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        q_factor(self.q)?;
        if self.cfl != T::one() {
            return Err(Error::CflViolation(to_f64(self.cfl)));
        }
        if self.n < 50 {
            return Err(Error::InvalidArgument(
                "at least 50 grid intervals required".into(),
            ));
        }
        if self.displacement.len() != self.n + 1 || self.velocity.len() != self.n + 1 {
            return Err(Error::DimensionMismatch("initial profiles".into()));
        }
        if !(self.horizon >= T::zero()) {
            return Err(Error::InvalidArgument("horizon must be ≥ 0".into()));
        }
        if let Reference::SmoothStep { rise, .. } = self.reference {
            if !(rise > T::zero() && rise.is_finite()) {
                return Err(Error::InvalidArgument("rise time must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Field state of the leapfrog scheme: two consecutive time levels.
#[derive(Debug, Clone)]
pub struct WavePde<T: Real> {
    q: T,
    n: usize,
    h: T,
    prev: Vec<T>,
    curr: Vec<T>,
}

impl<T: Real> WavePde<T> {
    pub fn new(sc: &WaveScenario<T>) -> Result<Self> {
        sc.validate()?;
        let n = sc.n;
        let h = sc.dt();
        let f = &sc.displacement;
        let g = &sc.velocity;
        // level −1 from the d'Alembert formula (trapezoid on the velocity)
        let mut prev = vec![T::zero(); n + 1];
        for i in 0..=n {
            prev[i] = if i == 0 || i == n {
                f[i] - h * g[i]
            } else {
                let avg = (f[i - 1] + f[i + 1]) * lit(0.5);
                let int = h * (g[i - 1] * lit(0.5) + g[i] + g[i + 1] * lit(0.5));
                avg - int * lit(0.5)
            };
        }
        Ok(Self {
            q: sc.q,
            n,
            h,
            prev,
            curr: f.clone(),
        })
    }

    pub fn field(&self) -> &[T] {
        &self.curr
    }

    pub fn y1(&self) -> T {
        self.curr[0]
    }

    pub fn y2(&self) -> T {
        self.curr[self.n]
    }

    /// `y₃ = a + u`: the part of the centered velocity at `ξ = 1` that does
    /// not depend on the current control.
    pub fn y3_offset(&self) -> T {
        (self.curr[self.n - 1] - self.prev[self.n]) / self.h
    }

    pub fn advance(&mut self, u: T) {
        let n = self.n;
        let (p, c) = (&self.prev, &self.curr);
        let mut next = vec![T::zero(); n + 1];
        for i in 1..n {
            next[i] = c[i + 1] + c[i - 1] - p[i];
        }
        // ghost x₋₁ = x₁ + q (x₀ⁿ⁺¹ − x₀ⁿ⁻¹), solved for x₀ⁿ⁺¹
        next[0] = (c[1] * lit(2.0) - (T::one() + self.q) * p[0]) / (T::one() - self.q);
        // ghost x_{N+1} = x_{N−1} + 2 Δξ u
        next[n] = c[n - 1] * lit(2.0) + self.h * lit::<T>(2.0) * u - p[n];
        self.prev = std::mem::replace(&mut self.curr, next);
    }
}

/// Closed-loop PDE run with `u = r − K* y`, `K*` advanced in lock-step.
/// Traces carry `t, y1, y2, y3, u, r`.
pub fn simulate_wave_pde<T: Real>(
    sc: &WaveScenario<T>,
    controller: &DelayNetwork<T>,
) -> Result<(Traces<T>, Vec<T>)> {
    if controller.n_inputs() != 3 || controller.n_outputs() != 1 {
        return Err(Error::DimensionMismatch(
            "controller must map 3 outputs to 1 input".into(),
        ));
    }
    let mut pde = WavePde::new(sc)?;
    let dt = sc.dt();
    let mut ctrl = NetworkSim::new(controller, dt)?;
    let steps = to_f64(sc.horizon / dt).round() as usize;
    let mut t_trace = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut y_prev: Option<DVector<T>> = None;
    for k in 0..=steps {
        let t = dt * lit(k as f64);
        let r = sc.reference.at(t);
        let (y1, y2, a) = (pde.y1(), pde.y2(), pde.y3_offset());
        // u = r − K*(y1, y2, a + u) is affine in u
        let resid = |u: T| u - r + ctrl.peek(&DVector::from_row_slice(&[y1, y2, a + u]))[0];
        let h0 = resid(T::zero());
        let slope = resid(T::one()) - h0;
        if slope.abs() < lit(1e-12) {
            return Err(Error::AlgebraicLoop);
        }
        let u = -h0 / slope;
        let y = DVector::from_row_slice(&[y1, y2, a + u]);
        t_trace.push(t);
        values.push(DVector::from_row_slice(&[y1, y2, a + u, u, r]));
        let rate = y_prev.as_ref().map(|yp| (&y - yp) / dt);
        let y_now = y.clone();
        ctrl.step(&move |tau: T| match &rate {
            Some(d) => &y_now + d * (tau - t),
            None => y_now.clone(),
        });
        y_prev = Some(y);
        pde.advance(u);
    }
    if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("wave simulation diverged"));
    }
    Ok((
        Traces {
            t: t_trace,
            names: ["y1", "y2", "y3", "u", "r"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            values,
        },
        pde.field().to_vec(),
    ))
}
