//! Proximity-control bundle method for locally Lipschitz functions.
//!
//! Each outer iteration solves a sequence of tangent programs
//!
//! ```text
//! minimize  φ(y) + τ/2 ‖y − x‖²   over the parameter box,
//! ```
//!
//! where `φ` is the max of downshifted cutting planes collected so far. A
//! trial point is accepted as a serious step when the achieved decrease is
//! at least `γ` times the decrease predicted by the model; otherwise the
//! model is enriched (null step) and `τ` is managed from the agreement
//! ratio of the enriched model. After a serious step the bundle restarts
//! from the aggregate plane of that step and the cuts of the new iterate.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::qp::solve_simplex_qp;
use crate::structure::Bound;
use crate::{lit, to_f64, Error, Real, Result};

/// Affine minorant candidate `value + gradientᵀ(y − point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T: Real> {
    pub value: T,
    pub gradient: DVector<T>,
}

/// Everything the oracle reports about one trial point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample<T: Real> {
    pub point: DVector<T>,
    pub value: T,
    pub planes: Vec<Plane<T>>,
    /// `false` marks a rejected point (barrier); value and planes are ignored.
    pub feasible: bool,
    /// Free-form secondary quantity logged with serious steps.
    pub aux: T,
}

impl<T: Real> OracleSample<T> {
    pub fn new(point: DVector<T>, value: T, gradients: Vec<DVector<T>>) -> Self {
        let planes = gradients
            .into_iter()
            .map(|gradient| Plane { value, gradient })
            .collect();
        Self {
            point,
            value,
            planes,
            feasible: true,
            aux: T::zero(),
        }
    }

    pub fn rejected(point: DVector<T>) -> Self {
        Self {
            point,
            value: T::zero(),
            planes: Vec::new(),
            feasible: false,
            aux: T::zero(),
        }
    }
}

pub trait Oracle<T: Real> {
    fn sample(&mut self, x: &DVector<T>) -> Result<OracleSample<T>>;
}

impl<T: Real, F> Oracle<T> for F
where
    F: FnMut(&DVector<T>) -> Result<OracleSample<T>>,
{
    fn sample(&mut self, x: &DVector<T>) -> Result<OracleSample<T>> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleOptions<T: Real> {
    pub tol_gap: T,
    pub tol_step: T,
    /// Acceptance threshold on `ρ`.
    pub gamma: T,
    /// Threshold on `ρ` / `ρ̃` driving `τ` changes.
    pub big_gamma: T,
    /// Quadratic downshift coefficient.
    pub downshift: T,
    pub tau_min: T,
    pub tau_max: T,
    pub tau0: Option<T>,
    pub max_bundle: usize,
    pub max_serious: usize,
    pub max_inner: usize,
    /// Stop as soon as a serious value drops below this.
    pub target: Option<T>,
}

impl<T: Real> Default for BundleOptions<T> {
    fn default() -> Self {
        Self {
            tol_gap: lit(1e-6),
            tol_step: lit(1e-6),
            gamma: lit(0.1),
            big_gamma: lit(0.6),
            downshift: lit(1e-4),
            tau_min: lit(1e-6),
            tau_max: lit(1e12),
            tau0: None,
            max_bundle: 50,
            max_serious: 300,
            max_inner: 50,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleStatus {
    Converged,
    TargetReached,
    MaxSeriousSteps,
    InnerExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriousStep<T: Real> {
    pub index: usize,
    pub value: T,
    pub aux: T,
    pub tau: T,
    pub step_norm: T,
    pub certificate: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleResult<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    pub aux: T,
    pub certificate: T,
    pub status: BundleStatus,
    pub history: Vec<SeriousStep<T>>,
    pub evaluations: usize,
}

impl<T: Real> BundleResult<T> {
    /// Iteration log as CSV.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("serious_idx,f,g,tau,step_norm,certificate\n");
        for h in &self.history {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
                h.index,
                to_f64(h.value),
                to_f64(h.aux),
                to_f64(h.tau),
                to_f64(h.step_norm),
                to_f64(h.certificate)
            );
        }
        s
    }
}

/// One cut of the bundle, anchored where it was generated.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut<T: Real> {
    pub z: DVector<T>,
    pub value: T,
    pub g: DVector<T>,
}

impl<T: Real> Cut<T> {
    /// Downshifted intercept at `x`; the plane becomes `a + gᵀ(y − x)`.
    pub fn intercept(&self, x: &DVector<T>, fx: T, c: T) -> T {
        let d = x - &self.z;
        let lin = self.value + self.g.dot(&d);
        let shift = (lin - fx).max(T::zero()) + c * d.norm_squared();
        lin - shift
    }
}

/// Solution of one tangent program.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentStep<T: Real> {
    pub y: DVector<T>,
    pub model_value: T,
    pub multipliers: DVector<T>,
    /// Aggregate subgradient restricted to the coordinates not pinned by
    /// the box.
    pub aggregate: DVector<T>,
    pub aggregate_intercept: T,
}

/// Downshifted model planes `(a_j, g_j)` at `x`.
pub fn model_planes<T: Real>(cuts: &[Cut<T>], x: &DVector<T>, fx: T, c: T) -> Vec<(T, DVector<T>)> {
    cuts.iter()
        .map(|k| (k.intercept(x, fx, c), k.g.clone()))
        .collect()
}

fn model_at<T: Real>(planes: &[(T, DVector<T>)], x: &DVector<T>, y: &DVector<T>) -> T {
    let d = y - x;
    planes.iter().map(|(a, g)| *a + g.dot(&d)).fold(
        T::min_value().unwrap_or(-T::one() / T::default_epsilon()),
        |a, b| a.max(b),
    )
}

/// `argmin φ(y) + τ/2 ‖y − x‖²` over the box, by the dual simplex QP.
/// Coordinates pushed outside the box are pinned at the bound and the
/// multipliers are recomputed on the remaining ones.
pub fn tangent_step<T: Real>(
    planes: &[(T, DVector<T>)],
    x: &DVector<T>,
    tau: T,
    bounds: &[Bound<T>],
) -> Result<TangentStep<T>> {
    if planes.is_empty() {
        return Err(Error::QpFailure("empty bundle".into()));
    }
    let n = x.len();
    let m = planes.len();
    let mut pinned: Vec<Option<T>> = vec![None; n];
    for _round in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
        // fixed displacement of pinned coordinates
        let mut dfix = DVector::zeros(n);
        for i in 0..n {
            if let Some(v) = pinned[i] {
                dfix[i] = v - x[i];
            }
        }
        let gf = DMatrix::from_fn(free.len(), m, |r, j| planes[j].1[free[r]]);
        let a = DVector::from_fn(m, |j, _| planes[j].0 + planes[j].1.dot(&dfix));
        let h = gf.transpose() * &gf / tau;
        let sol = solve_simplex_qp(&h, &(-&a))?;
        let agg_free = &gf * &sol.lambda;
        let mut y = x + &dfix;
        for (r, &i) in free.iter().enumerate() {
            y[i] = x[i] - agg_free[r] / tau;
        }
        let mut changed = false;
        for &i in &free {
            let clipped = bounds.get(i).map_or(y[i], |b| b.clip(y[i]));
            if clipped != y[i] {
                pinned[i] = Some(clipped);
                changed = true;
            }
        }
        // release pinned coordinates the aggregate pulls back inside
        let agg_full = DVector::from_fn(n, |i, _| {
            (0..m)
                .map(|j| sol.lambda[j] * planes[j].1[i])
                .fold(T::zero(), |s, v| s + v)
        });
        for i in 0..n {
            if let (Some(v), false) = (pinned[i], changed) {
                let want = x[i] - agg_full[i] / tau;
                let b = bounds.get(i).copied().unwrap_or_default();
                if b.contains(want)
                    && want != v
                    && (want - v).abs() > lit::<T>(1e-12) * (T::one() + v.abs())
                {
                    pinned[i] = None;
                    changed = true;
                }
            }
        }
        if !changed {
            let mut aggregate = DVector::zeros(n);
            for (r, &i) in free.iter().enumerate() {
                aggregate[i] = agg_free[r];
            }
            let aggregate_intercept = (0..m)
                .map(|j| sol.lambda[j] * planes[j].0)
                .fold(T::zero(), |s, v| s + v);
            let model_value = model_at(planes, x, &y);
            return Ok(TangentStep {
                y,
                model_value,
                multipliers: sol.lambda,
                aggregate,
                aggregate_intercept,
            });
        }
    }
    Err(Error::QpFailure("box active set did not settle".into()))
}

/// Minimizes the function behind `oracle` starting from `x0`.
pub fn run<T: Real, O: Oracle<T> + ?Sized>(
    oracle: &mut O,
    x0: &DVector<T>,
    bounds: &[Bound<T>],
    opts: &BundleOptions<T>,
) -> Result<BundleResult<T>> {
    let mut x: DVector<T> = DVector::from_iterator(
        x0.len(),
        x0.iter()
            .enumerate()
            .map(|(i, v)| bounds.get(i).map_or(*v, |b| b.clip(*v))),
    );
    let s0 = oracle.sample(&x)?;
    let mut evaluations = 1;
    if !s0.feasible || !s0.value.is_finite() || s0.planes.is_empty() {
        return Err(Error::InvalidArgument(
            "bundle start point is not a valid oracle point".into(),
        ));
    }
    let mut fx = s0.value;
    let mut aux = s0.aux;
    let mut cuts: Vec<Cut<T>> = planes_to_cuts(&s0);
    let g0 = s0
        .planes
        .iter()
        .map(|p| p.gradient.norm())
        .fold(T::zero(), |a, b| a.max(b));
    let mut tau = opts
        .tau0
        .unwrap_or_else(|| g0.max(T::one()))
        .max(opts.tau_min)
        .min(opts.tau_max);
    let mut history = Vec::new();
    let mut certificate = g0;

    if opts.target.is_some_and(|t| fx < t) {
        return Ok(BundleResult {
            x,
            value: fx,
            aux,
            certificate,
            status: BundleStatus::TargetReached,
            history,
            evaluations,
        });
    }

    for serious in 0..opts.max_serious {
        let mut accepted = false;
        // a step shrunk only by barrier rejections certifies nothing
        let mut after_rejection = false;
        for _inner in 0..opts.max_inner {
            let planes = model_planes(&cuts, &x, fx, opts.downshift);
            let step = tangent_step(&planes, &x, tau, bounds)?;
            certificate = step.aggregate.norm();
            let predicted = fx - step.model_value;
            let step_norm = (&step.y - &x).norm();
            if !after_rejection
                && predicted <= opts.tol_gap * (T::one() + fx.abs())
                && step_norm <= opts.tol_step
            {
                return Ok(BundleResult {
                    x,
                    value: fx,
                    aux,
                    certificate,
                    status: BundleStatus::Converged,
                    history,
                    evaluations,
                });
            }
            let trial = oracle.sample(&step.y)?;
            evaluations += 1;
            if !trial.feasible || !trial.value.is_finite() {
                if tau >= opts.tau_max {
                    break;
                }
                tau = (tau + tau).min(opts.tau_max);
                after_rejection = true;
                continue;
            }
            after_rejection = false;
            let rho = if predicted > T::zero() {
                (fx - trial.value) / predicted
            } else {
                -T::one()
            };
            if rho >= opts.gamma && trial.value < fx {
                let x_old = x.clone();
                x = step.y.clone();
                fx = trial.value;
                aux = trial.aux;
                if rho >= opts.big_gamma {
                    tau = (tau * lit(0.5)).max(opts.tau_min);
                }
                let new_cuts = planes_to_cuts(&trial);
                // compress the bundle to the aggregate of the step just taken
                let aggregate = Cut {
                    z: x_old,
                    value: step.aggregate_intercept,
                    g: aggregate_full(&planes, &step.multipliers),
                };
                cuts.clear();
                cuts.push(aggregate);
                cuts.extend(new_cuts);
                history.push(SeriousStep {
                    index: serious + 1,
                    value: fx,
                    aux,
                    tau,
                    step_norm,
                    certificate,
                });
                accepted = true;
                break;
            }
            // null step: enrich the model with the new cuts and the aggregate
            let new_cuts = planes_to_cuts(&trial);
            compact(
                &mut cuts,
                &step.multipliers,
                opts.max_bundle,
                new_cuts.len() + 1,
            );
            cuts.extend(new_cuts);
            cuts.push(Cut {
                z: x.clone(),
                value: step.aggregate_intercept,
                g: aggregate_full(&planes, &step.multipliers),
            });
            let enriched = model_planes(&cuts, &x, fx, opts.downshift);
            let phi_plus = model_at(&enriched, &x, &step.y);
            let rho_tilde = if predicted > T::zero() {
                (fx - phi_plus) / predicted
            } else {
                T::one()
            };
            if rho_tilde >= opts.big_gamma {
                tau = (tau + tau).min(opts.tau_max);
            }
        }
        if !accepted {
            return Ok(BundleResult {
                x,
                value: fx,
                aux,
                certificate,
                status: BundleStatus::InnerExhausted,
                history,
                evaluations,
            });
        }
        if opts.target.is_some_and(|t| fx < t) {
            return Ok(BundleResult {
                x,
                value: fx,
                aux,
                certificate,
                status: BundleStatus::TargetReached,
                history,
                evaluations,
            });
        }
    }
    Ok(BundleResult {
        x,
        value: fx,
        aux,
        certificate,
        status: BundleStatus::MaxSeriousSteps,
        history,
        evaluations,
    })
}

fn planes_to_cuts<T: Real>(s: &OracleSample<T>) -> Vec<Cut<T>> {
    s.planes
        .iter()
        .map(|p| Cut {
            z: s.point.clone(),
            value: p.value,
            g: p.gradient.clone(),
        })
        .collect()
}

fn aggregate_full<T: Real>(planes: &[(T, DVector<T>)], lambda: &DVector<T>) -> DVector<T> {
    let n = planes[0].1.len();
    planes
        .iter()
        .zip(lambda.iter())
        .fold(DVector::zeros(n), |acc, ((_, g), &l)| acc + g * l)
}

/// Drops the oldest cuts with zero multiplier until `incoming` more fit.
fn compact<T: Real>(cuts: &mut Vec<Cut<T>>, lambda: &DVector<T>, max: usize, incoming: usize) {
    let mut excess = (cuts.len() + incoming).saturating_sub(max);
    if excess == 0 {
        return;
    }
    let mut j = 0;
    cuts.retain(|_| {
        let active = lambda.get(j).is_some_and(|&l| l > T::zero());
        j += 1;
        if active || excess == 0 {
            true
        } else {
            excess -= 1;
            false
        }
    });
    // still too many: drop the oldest ones regardless
    while cuts.len() + incoming > max && cuts.len() > 1 {
        cuts.remove(0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_abs(x: &DVector<f64>) -> Result<OracleSample<f64>> {
        let v = x[0].abs() + 2.0 * x[1].abs();
        let g = DVector::from_row_slice(&[x[0].signum(), 2.0 * x[1].signum()]);
        Ok(OracleSample::new(x.clone(), v, vec![g]))
    }

    fn free(n: usize) -> Vec<Bound<f64>> {
        vec![Bound::default(); n]
    }

    #[test]
    fn single_plane_is_gradient_step() {
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let g = DVector::from_row_slice(&[3.0, -1.0]);
        let s = tangent_step(&[(5.0, g.clone())], &x, 4.0, &free(2)).unwrap();
        assert!((&s.y - (&x - &g / 4.0)).norm() < 1e-14);
    }

    #[test]
    fn opposing_planes_straddle_kink() {
        let x = DVector::from_row_slice(&[0.5]);
        let planes = vec![
            (0.5, DVector::from_row_slice(&[1.0])),
            (-0.5, DVector::from_row_slice(&[-1.0])),
        ];
        let s = tangent_step(&planes, &x, 1.0, &free(1)).unwrap();
        assert!(s.y[0] > -0.5 && s.y[0] < 0.5);
        assert!(s.model_value >= 0.0);
        let far = tangent_step(&planes, &x, 1e9, &free(1)).unwrap();
        assert!((far.y[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn box_pins_coordinates() {
        let x = DVector::from_row_slice(&[0.0f64, 0.0]);
        let g = DVector::from_row_slice(&[-10.0f64, 1.0]);
        let bounds = vec![Bound::new(None, Some(1.0)), Bound::default()];
        let s = tangent_step(&[(0.0, g)], &x, 1.0, &bounds).unwrap();
        assert_eq!(s.y[0], 1.0);
        assert!((s.y[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn separable_kinks() {
        let mut o = oracle_abs;
        let r = run(
            &mut o,
            &DVector::from_row_slice(&[3.0, -2.0]),
            &free(2),
            &BundleOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, BundleStatus::Converged);
        assert!(r.value <= 1e-6, "{}", r.value);
        assert!(r.history.windows(2).all(|w| w[1].value < w[0].value));
    }

    #[test]
    fn equalizer_of_parabolas() {
        let mut o = |x: &DVector<f64>| {
            let (a, b) = (x[0] * x[0], (x[0] - 2.0) * (x[0] - 2.0));
            let mut g = Vec::new();
            if a >= b - 1e-12 {
                g.push(DVector::from_element(1, 2.0 * x[0]));
            }
            if b >= a - 1e-12 {
                g.push(DVector::from_element(1, 2.0 * (x[0] - 2.0)));
            }
            Ok(OracleSample::new(x.clone(), a.max(b), g))
        };
        let r = run(
            &mut o,
            &DVector::from_element(1, 5.0),
            &free(1),
            &BundleOptions::default(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn barrier_everywhere_exhausts() {
        let mut calls = 0;
        let mut o = |x: &DVector<f64>| {
            calls += 1;
            if calls == 1 {
                Ok(OracleSample::new(
                    x.clone(),
                    1.0,
                    vec![DVector::from_element(1, 1.0)],
                ))
            } else {
                Ok(OracleSample::rejected(x.clone()))
            }
        };
        let r = run(
            &mut o,
            &DVector::from_element(1, 0.0),
            &free(1),
            &BundleOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, BundleStatus::InnerExhausted);
        assert_eq!(r.x[0], 0.0);
    }

    #[test]
    fn near_optimum_terminates() {
        let mut o = |x: &DVector<f64>| {
            Ok(OracleSample::new(
                x.clone(),
                x[0].abs(),
                vec![DVector::from_element(1, x[0].signum())],
            ))
        };
        let r = run(
            &mut o,
            &DVector::from_element(1, 1e-9),
            &free(1),
            &BundleOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, BundleStatus::Converged);
        assert!(r.history.is_empty());
    }
}
