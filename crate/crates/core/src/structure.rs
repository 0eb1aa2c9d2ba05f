//! Differentiable controller parameterizations `x ↦ (A_K, B_K, C_K, D_K)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sensitivity::{Block, ParamJacobian};
use crate::ss::{compose, ComposeMode, StateSpace};
use crate::{lit, Error, Real, Result};

/// Smallest admissible PID roll-off time constant.
pub const TAU_MIN: f64 = 1e-4;
/// Value a tunable `τ` takes in the all-zeros starting point.
pub const TAU_ZERO_START: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum StructureSpec<T: Real> {
    /// Static gain with `nu` outputs and `ny` inputs, parameters row-major.
    StaticGain {
        nu: usize,
        ny: usize,
    },
    /// `k_P + k_I/s + k_D s/(1 + τ s)`. `tau = Some(_)` fixes the roll-off,
    /// `derivative = false` removes `k_D` from the parameter list.
    RealizablePid {
        tau: Option<T>,
        derivative: bool,
    },
    /// `(A − B₂K_c − K_f C₂, K_f, −K_c, 0)`, parameters `K_c` then `K_f`.
    ObserverBased {
        a: DMatrix<T>,
        b2: DMatrix<T>,
        c2: DMatrix<T>,
    },
    /// Unstructured realization of order `nk`; parameters are `A_K`, `B_K`,
    /// `C_K`, `D_K`, each row-major.
    FullOrder {
        nk: usize,
        nu: usize,
        ny: usize,
    },
    Decentralized(Vec<StructureSpec<T>>),
    /// `a/(s+a)`.
    FirstOrderFilter,
    /// `K₀ + Σ_{j=1..d} (q − q₀)ʲ K_j(x)`, a static gain.
    PolynomialScheduled {
        base: DMatrix<T>,
        degree: usize,
        q0: T,
    },
    FixedBlock(StateSpace<T>),
}

impl<T: Real> StructureSpec<T> {
    pub fn pid() -> Self {
        StructureSpec::RealizablePid {
            tau: None,
            derivative: true,
        }
    }

    pub fn parameter_count(&self) -> usize {
        use StructureSpec::*;
        match self {
            StaticGain { nu, ny } => nu * ny,
            RealizablePid { tau, derivative } => {
                2 + usize::from(tau.is_none()) + usize::from(*derivative)
            }
            ObserverBased { a, b2, c2 } => {
                let nk = a.nrows();
                nk * b2.ncols() + c2.nrows() * nk
            }
            FullOrder { nk, nu, ny } => nk * nk + nk * ny + nk * nu + ny * nu,
            Decentralized(children) => children.iter().map(|c| c.parameter_count()).sum(),
            FirstOrderFilter => 1,
            PolynomialScheduled { base, degree, .. } => degree * base.len(),
            FixedBlock(_) => 0,
        }
    }

    /// `(states, inputs, outputs)` of the assembled controller.
    pub fn dims(&self) -> (usize, usize, usize) {
        use StructureSpec::*;
        match self {
            StaticGain { nu, ny } => (0, *ny, *nu),
            RealizablePid { .. } => (2, 1, 1),
            ObserverBased { a, b2, c2 } => (a.nrows(), c2.nrows(), b2.ncols()),
            FullOrder { nk, nu, ny } => (*nk, *ny, *nu),
            Decentralized(children) => children.iter().fold((0, 0, 0), |acc, c| {
                let d = c.dims();
                (acc.0 + d.0, acc.1 + d.1, acc.2 + d.2)
            }),
            FirstOrderFilter => (1, 1, 1),
            PolynomialScheduled { base, .. } => (0, base.ncols(), base.nrows()),
            FixedBlock(k) => (k.nx(), k.nu(), k.ny()),
        }
    }

    pub fn is_scheduled(&self) -> bool {
        match self {
            StructureSpec::PolynomialScheduled { .. } => true,
            StructureSpec::Decentralized(c) => c.iter().any(|s| s.is_scheduled()),
            _ => false,
        }
    }

    /// Bounds implied by the structure itself (the `τ` floor).
    pub fn default_bounds(&self) -> Vec<Bound<T>> {
        use StructureSpec::*;
        match self {
            RealizablePid {
                tau: None,
                derivative,
            } => {
                let mut b = vec![Bound::default(); 3 + usize::from(*derivative)];
                b[0].lo = Some(lit(TAU_MIN));
                b
            }
            Decentralized(children) => children.iter().flat_map(|c| c.default_bounds()).collect(),
            other => vec![Bound::default(); other.parameter_count()],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StructureSpec::ObserverBased { a, b2, c2 } => {
                if !a.is_square() || b2.nrows() != a.nrows() || c2.ncols() != a.nrows() {
                    return Err(Error::DimensionMismatch("observer data".into()));
                }
            }
            StructureSpec::PolynomialScheduled { degree, .. } if *degree == 0 => {
                return Err(Error::InvalidArgument("schedule degree must be ≥ 1".into()));
            }
            StructureSpec::Decentralized(children) => {
                for c in children {
                    c.validate()?;
                }
            }
            StructureSpec::RealizablePid { tau: Some(t), .. } if *t < lit(TAU_MIN) => {
                return Err(Error::InvalidArgument("fixed τ below minimum".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound<T: Real> {
    pub lo: Option<T>,
    pub hi: Option<T>,
}

impl<T: Real> Default for Bound<T> {
    fn default() -> Self {
        Self { lo: None, hi: None }
    }
}

impl<T: Real> Bound<T> {
    pub fn new(lo: Option<T>, hi: Option<T>) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }

    pub fn clip(&self, v: T) -> T {
        let v = self.lo.map_or(v, |lo| v.max(lo));
        self.hi.map_or(v, |hi| v.min(hi))
    }

    /// Intersection of two boxes.
    pub fn meet(&self, other: &Self) -> Self {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Self { lo, hi }
    }
}

/// Tunable vector together with its box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T: Real> {
    pub x: DVector<T>,
    pub bounds: Vec<Bound<T>>,
}

impl<T: Real> ParamVector<T> {
    pub fn new(x: DVector<T>, bounds: Vec<Bound<T>>) -> Result<Self> {
        if bounds.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters but {} bounds",
                x.len(),
                bounds.len()
            )));
        }
        let p = Self { x, bounds };
        p.check_bounds()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn check_bounds(&self) -> Result<()> {
        for (index, (v, b)) in self.x.iter().zip(&self.bounds).enumerate() {
            if !v.is_finite() || !b.contains(*v) {
                return Err(Error::BoundViolation { index });
            }
        }
        Ok(())
    }

    pub fn project(&self, y: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(y.len(), y.iter().zip(&self.bounds).map(|(v, b)| b.clip(*v)))
    }

    /// Same box, new point (projected).
    pub fn with_x(&self, x: DVector<T>) -> Self {
        let x = self.project(&x);
        Self {
            x,
            bounds: self.bounds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy<T: Real> {
    Zeros,
    Given(DVector<T>),
    Random(u64),
}

pub fn init_params<T: Real>(
    spec: &StructureSpec<T>,
    strategy: &InitStrategy<T>,
) -> Result<ParamVector<T>> {
    spec.validate()?;
    let bounds = spec.default_bounds();
    let n = spec.parameter_count();
    let x = match strategy {
        InitStrategy::Zeros => DVector::from_iterator(
            n,
            bounds.iter().map(|b| {
                if b.contains(T::zero()) {
                    T::zero()
                } else if b.lo == Some(lit(TAU_MIN)) {
                    lit(TAU_ZERO_START)
                } else {
                    b.clip(T::zero())
                }
            }),
        ),
        InitStrategy::Given(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "expected {n} parameters, got {}",
                    v.len()
                )));
            }
            v.clone()
        }
        InitStrategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            DVector::from_iterator(
                n,
                bounds
                    .iter()
                    .map(|b| b.clip(lit(rng.random_range(-1.0..=1.0)))),
            )
        }
    };
    ParamVector::new(x, bounds)
}

fn schedule_offset<T: Real>(spec: &StructureSpec<T>, q: Option<T>) -> Result<T> {
    match (spec, q) {
        (StructureSpec::PolynomialScheduled { q0, .. }, Some(q)) => Ok(q - *q0),
        (StructureSpec::PolynomialScheduled { .. }, None) => Err(Error::MissingScheduleValue),
        _ => Ok(T::zero()),
    }
}

/// Builds `K(x)`; `schedule_value` is mandatory for scheduled structures.
pub fn assemble<T: Real>(
    spec: &StructureSpec<T>,
    x: &ParamVector<T>,
    schedule_value: Option<T>,
) -> Result<StateSpace<T>> {
    spec.validate()?;
    if x.len() != spec.parameter_count() {
        return Err(Error::DimensionMismatch("parameter count".into()));
    }
    x.check_bounds()?;
    assemble_raw(spec, x.x.as_slice(), schedule_value)
}

fn assemble_raw<T: Real>(spec: &StructureSpec<T>, x: &[T], q: Option<T>) -> Result<StateSpace<T>> {
    use StructureSpec::*;
    match spec {
        StaticGain { nu, ny } => Ok(StateSpace::gain(DMatrix::from_row_slice(*nu, *ny, x))),
        RealizablePid { tau, derivative } => {
            let (tau, rest) = match tau {
                Some(t) => (*t, x),
                None => (x[0], &x[1..]),
            };
            let (kp, ki) = (rest[0], rest[1]);
            let kd = if *derivative { rest[2] } else { T::zero() };
            let it = T::one() / tau;
            StateSpace::new(
                DMatrix::from_row_slice(2, 2, &[T::zero(), T::zero(), T::zero(), -it]),
                DMatrix::from_column_slice(2, 1, &[T::one(), -kd * it]),
                DMatrix::from_row_slice(1, 2, &[ki, it]),
                DMatrix::from_element(1, 1, kp + kd * it),
            )
        }
        ObserverBased { a, b2, c2 } => {
            let (nk, nu, ny) = (a.nrows(), b2.ncols(), c2.nrows());
            let kc = DMatrix::from_row_slice(nu, nk, &x[..nu * nk]);
            let kf = DMatrix::from_row_slice(nk, ny, &x[nu * nk..]);
            StateSpace::new(a - b2 * &kc - &kf * c2, kf, -kc, DMatrix::zeros(nu, ny))
        }
        FullOrder { nk, nu, ny } => {
            let (nk, nu, ny) = (*nk, *nu, *ny);
            let mut at = 0;
            let mut take = |r: usize, c: usize| {
                let m = DMatrix::from_row_slice(r, c, &x[at..at + r * c]);
                at += r * c;
                m
            };
            let a = take(nk, nk);
            let b = take(nk, ny);
            let c = take(nu, nk);
            let d = take(nu, ny);
            StateSpace::new(a, b, c, d)
        }
        Decentralized(children) => {
            let mut at = 0;
            let blocks = children
                .iter()
                .map(|c| {
                    let n = c.parameter_count();
                    let k = assemble_raw(c, &x[at..at + n], q);
                    at += n;
                    k
                })
                .collect::<Result<Vec<_>>>()?;
            compose(ComposeMode::BlockDiag, &blocks)
        }
        FirstOrderFilter => {
            let a = x[0];
            StateSpace::new(
                DMatrix::from_element(1, 1, -a),
                DMatrix::from_element(1, 1, a),
                DMatrix::from_element(1, 1, T::one()),
                DMatrix::zeros(1, 1),
            )
        }
        PolynomialScheduled { base, degree, .. } => {
            let dq = schedule_offset(spec, q)?;
            let m = base.len();
            let mut k = base.clone();
            let mut pow = T::one();
            for j in 0..*degree {
                pow *= dq;
                k += DMatrix::from_row_slice(base.nrows(), base.ncols(), &x[j * m..(j + 1) * m])
                    * pow;
            }
            Ok(StateSpace::gain(k))
        }
        FixedBlock(k) => Ok(k.clone()),
    }
}

/// Exact derivatives of `assemble` with respect to every parameter.
pub fn jacobian<T: Real>(
    spec: &StructureSpec<T>,
    x: &ParamVector<T>,
    schedule_value: Option<T>,
) -> Result<ParamJacobian<T>> {
    spec.validate()?;
    if x.len() != spec.parameter_count() {
        return Err(Error::DimensionMismatch("parameter count".into()));
    }
    x.check_bounds()?;
    let (nx, nu, ny) = spec.dims();
    let mut jac = ParamJacobian::new(nx, nu, ny, x.len());
    fill_jacobian(spec, x.x.as_slice(), schedule_value, &mut jac, (0, 0, 0, 0))?;
    Ok(jac)
}

/// `off = (param, state, input, output)` offsets of the current block.
fn fill_jacobian<T: Real>(
    spec: &StructureSpec<T>,
    x: &[T],
    q: Option<T>,
    jac: &mut ParamJacobian<T>,
    off: (usize, usize, usize, usize),
) -> Result<()> {
    use StructureSpec::*;
    let (p0, s0, i0, o0) = off;
    match spec {
        StaticGain { nu, ny } => {
            for r in 0..*nu {
                for c in 0..*ny {
                    jac.push(p0 + r * ny + c, Block::D, o0 + r, i0 + c, T::one());
                }
            }
        }
        RealizablePid { tau, derivative } => {
            let (t, shift) = match tau {
                Some(t) => (*t, 0),
                None => (x[0], 1),
            };
            let kd = if *derivative { x[shift + 2] } else { T::zero() };
            let it = T::one() / t;
            if tau.is_none() {
                let it2 = it * it;
                jac.push(p0, Block::A, s0 + 1, s0 + 1, it2);
                jac.push(p0, Block::B, s0 + 1, i0, kd * it2);
                jac.push(p0, Block::C, o0, s0 + 1, -it2);
                jac.push(p0, Block::D, o0, i0, -kd * it2);
            }
            jac.push(p0 + shift, Block::D, o0, i0, T::one());
            jac.push(p0 + shift + 1, Block::C, o0, s0, T::one());
            if *derivative {
                jac.push(p0 + shift + 2, Block::B, s0 + 1, i0, -it);
                jac.push(p0 + shift + 2, Block::D, o0, i0, it);
            }
        }
        ObserverBased { a, b2, c2 } => {
            let (nk, nu, ny) = (a.nrows(), b2.ncols(), c2.nrows());
            for i in 0..nu {
                for j in 0..nk {
                    let k = p0 + i * nk + j;
                    for r in 0..nk {
                        jac.push(k, Block::A, s0 + r, s0 + j, -b2[(r, i)]);
                    }
                    jac.push(k, Block::C, o0 + i, s0 + j, -T::one());
                }
            }
            for i in 0..nk {
                for j in 0..ny {
                    let k = p0 + nu * nk + i * ny + j;
                    for c in 0..nk {
                        jac.push(k, Block::A, s0 + i, s0 + c, -c2[(j, c)]);
                    }
                    jac.push(k, Block::B, s0 + i, i0 + j, T::one());
                }
            }
        }
        FullOrder { nk, nu, ny } => {
            let mut k = p0;
            let layout = [
                (Block::A, *nk, *nk, s0, s0),
                (Block::B, *nk, *ny, s0, i0),
                (Block::C, *nu, *nk, o0, s0),
                (Block::D, *nu, *ny, o0, i0),
            ];
            for (block, rows, cols, r0, c0) in layout {
                for r in 0..rows {
                    for c in 0..cols {
                        jac.push(k, block, r0 + r, c0 + c, T::one());
                        k += 1;
                    }
                }
            }
        }
        Decentralized(children) => {
            let (mut p, mut s, mut i, mut o) = off;
            for c in children {
                let n = c.parameter_count();
                fill_jacobian(c, &x[p - p0..p - p0 + n], q, jac, (p, s, i, o))?;
                let (cs, ci, co) = c.dims();
                p += n;
                s += cs;
                i += ci;
                o += co;
            }
        }
        FirstOrderFilter => {
            jac.push(p0, Block::A, s0, s0, -T::one());
            jac.push(p0, Block::B, s0, i0, T::one());
        }
        PolynomialScheduled { base, degree, .. } => {
            let dq = schedule_offset(spec, q)?;
            let (rows, cols) = base.shape();
            let mut pow = T::one();
            for j in 0..*degree {
                pow *= dq;
                for r in 0..rows {
                    for c in 0..cols {
                        jac.push(
                            p0 + j * rows * cols + r * cols + c,
                            Block::D,
                            o0 + r,
                            i0 + c,
                            pow,
                        );
                    }
                }
            }
        }
        FixedBlock(_) => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64], spec: &StructureSpec<f64>) -> ParamVector<f64> {
        init_params(spec, &InitStrategy::Given(DVector::from_row_slice(v))).unwrap()
    }

    fn wave_schedule() -> StructureSpec<f64> {
        StructureSpec::PolynomialScheduled {
            base: DMatrix::from_row_slice(1, 3, &[-1.049, -1.049, -0.05402]),
            degree: 2,
            q0: 3.0,
        }
    }

    #[test]
    fn pid_realization() {
        let spec = StructureSpec::pid();
        let k = assemble(&spec, &pv(&[1.0, 2.0, 3.0, 4.0], &spec), None).unwrap();
        assert_eq!(k.d[(0, 0)], 6.0);
        assert_eq!(k.c.as_slice(), &[3.0, 1.0]);
        assert_eq!(k.b.as_slice(), &[1.0, -4.0]);
        assert_eq!(k.a, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn pid_tau_derivative() {
        let spec = StructureSpec::pid();
        let jac = jacobian(&spec, &pv(&[1.0, 2.0, 3.0, 4.0], &spec), None).unwrap();
        let d = jac.dense(0);
        assert_eq!(d.da[(1, 1)], 1.0);
        assert_eq!(d.db[(1, 0)], 4.0);
        assert_eq!(d.dc[(0, 1)], -1.0);
        assert_eq!(d.dd[(0, 0)], -4.0);
    }

    #[test]
    fn scheduled_gain_arithmetic() {
        let spec = wave_schedule();
        let x = pv(
            &[-0.1102, -0.1102, -0.1053, 0.03901, 0.03901, 0.02855],
            &spec,
        );
        let k = assemble(&spec, &x, Some(2.0)).unwrap();
        let want = [-0.89979, -0.89979, 0.07983];
        for (g, w) in k.d.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
        assert!(matches!(
            assemble(&spec, &x, None),
            Err(Error::MissingScheduleValue)
        ));
        let jac = jacobian(&spec, &x, Some(3.0)).unwrap();
        assert!((0..6).all(|k| jac.dense(k).is_zero()));
    }

    #[test]
    fn counts() {
        let full = StructureSpec::<f64>::FullOrder {
            nk: 3,
            nu: 2,
            ny: 4,
        };
        assert_eq!(full.parameter_count(), 9 + 12 + 6 + 8);
        let pi = StructureSpec::<f64>::RealizablePid {
            tau: Some(0.1),
            derivative: true,
        };
        assert_eq!(pi.parameter_count(), 3);
        assert_eq!(StructureSpec::<f64>::pid().parameter_count(), 4);
        let fixed = StructureSpec::FixedBlock(StateSpace::<f64>::first_order(1.0, 2.0));
        assert_eq!(fixed.parameter_count(), 0);
        let x = init_params(&fixed, &InitStrategy::Zeros).unwrap();
        assert_eq!(
            assemble(&fixed, &x, None).unwrap(),
            StateSpace::first_order(1.0, 2.0)
        );
    }

    #[test]
    fn init_strategies() {
        let spec = StructureSpec::<f64>::StaticGain { nu: 1, ny: 3 };
        assert_eq!(
            init_params(&spec, &InitStrategy::Zeros)
                .unwrap()
                .x
                .as_slice(),
            &[0.0; 3]
        );
        let a = init_params(&spec, &InitStrategy::Random(7)).unwrap();
        let b = init_params(&spec, &InitStrategy::Random(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.x.iter().all(|v| v.abs() <= 1.0));
        let pid = StructureSpec::<f64>::pid();
        let z = init_params(&pid, &InitStrategy::Zeros).unwrap();
        assert_eq!(z.x[0], TAU_ZERO_START);
        let bad = init_params(
            &pid,
            &InitStrategy::Given(DVector::from_row_slice(&[0.0, 1.0, 1.0, 1.0])),
        );
        assert!(matches!(bad, Err(Error::BoundViolation { index: 0 })));
    }

    #[test]
    fn static_jacobian_is_indicator() {
        let spec = StructureSpec::<f64>::StaticGain { nu: 2, ny: 2 };
        let jac = jacobian(
            &spec,
            &init_params(&spec, &InitStrategy::Zeros).unwrap(),
            None,
        )
        .unwrap();
        for k in 0..4 {
            let d = jac.dense(k).dd;
            assert_eq!(d.sum(), 1.0);
            assert_eq!(d[(k / 2, k % 2)], 1.0);
        }
    }
}
