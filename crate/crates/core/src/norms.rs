//! Requirement functionals: H₂ norm, H∞ norm and pole-region violation.

use nalgebra::{Complex, DMatrix};

use crate::linalg;
use crate::ss::{cabs, Spectrum, StateSpace};
use crate::{lit, to_f64, Error, Real, Result};

/// Default relative accuracy for H∞ evaluations inside optimization.
pub const DEFAULT_HINF_TOL: f64 = 1e-8;
const MAX_LEVEL_SET_ITERATIONS: usize = 50;
const PEAK_REL: f64 = 1e-6;

fn require_stable<T: Real>(sys: &StateSpace<T>) -> Result<Option<Spectrum<T>>> {
    if sys.nx() == 0 {
        return Ok(None);
    }
    let sp = sys.poles()?;
    if !sp.is_stable() {
        return Err(Error::Unstable(to_f64(sp.abscissa)));
    }
    Ok(Some(sp))
}

/// Controllability and observability Gramians of a stable system.
#[derive(Debug, Clone)]
pub struct Gramians<T: Real> {
    /// `A X + X Aᵀ + B Bᵀ = 0`
    pub controllability: DMatrix<T>,
    /// `Aᵀ Y + Y A + Cᵀ C = 0`
    pub observability: DMatrix<T>,
}

pub fn gramians<T: Real>(sys: &StateSpace<T>) -> Result<Gramians<T>> {
    require_stable(sys)?;
    let x = linalg::lyapunov(&sys.a, &(&sys.b * sys.b.transpose()))?;
    let y = linalg::lyapunov(&sys.a.transpose(), &(sys.c.transpose() * &sys.c))?;
    Ok(Gramians {
        controllability: x,
        observability: y,
    })
}

pub fn controllability_gramian<T: Real>(sys: &StateSpace<T>) -> Result<DMatrix<T>> {
    linalg::lyapunov(&sys.a, &(&sys.b * sys.b.transpose()))
}

/// H₂ norm `sqrt(trace(C X Cᵀ))`.
pub fn h2_norm<T: Real>(sys: &StateSpace<T>) -> Result<T> {
    if sys.d.iter().any(|&v| v != T::zero()) {
        return Err(Error::NonzeroFeedthrough);
    }
    require_stable(sys)?;
    if sys.nx() == 0 {
        return Ok(T::zero());
    }
    let x = controllability_gramian(sys)?;
    let tr = (&sys.c * x * sys.c.transpose()).trace();
    Ok(tr.max(T::zero()).sqrt())
}

/// Outcome of an H∞ norm evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct HinfResult<T: Real> {
    pub value: T,
    /// Frequencies (rad/s, ascending) where `σ̄(G(jω))` is within a relative
    /// `1e-6` of `value`.
    pub peak_frequencies: Vec<T>,
    /// The supremum is (also) approached as `ω → ∞`, where `G = D`.
    pub peak_at_infinity: bool,
    pub converged: bool,
    pub iterations: usize,
}

fn sigma_at<T: Real>(sys: &StateSpace<T>, omega: T) -> Result<T> {
    Ok(linalg::sigma_max(&sys.freq_response(omega)?))
}

/// Golden-section search for the largest `σ̄` on `[lo, hi]`.
fn refine_peak<T: Real>(sys: &StateSpace<T>, lo: T, hi: T) -> Result<(T, T)> {
    let ratio = lit::<T>(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = sigma_at(sys, c)?;
    let mut fd = sigma_at(sys, d)?;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..200 {
        if (b - a) <= lit::<T>(1e-13) * (T::one() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = sigma_at(sys, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = sigma_at(sys, d)?;
        }
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
    }
    Ok(best)
}

/// Hamiltonian whose imaginary-axis eigenvalues are the frequencies where
/// `γ` is a singular value of `G(jω)`.
fn hamiltonian<T: Real>(sys: &StateSpace<T>, gamma: T) -> Result<DMatrix<T>> {
    let n = sys.nx();
    let m = sys.nu();
    let p = sys.ny();
    let dtd = sys.d.transpose() * &sys.d;
    let r = DMatrix::<T>::identity(m, m) * (gamma * gamma) - dtd;
    let r_inv = r.clone().cholesky().ok_or(Error::SingularR)?.inverse();
    let ah = &sys.a + &sys.b * &r_inv * sys.d.transpose() * &sys.c;
    let top_right = &sys.b * &r_inv * sys.b.transpose();
    let inner = DMatrix::<T>::identity(p, p) + &sys.d * &r_inv * sys.d.transpose();
    let bottom_left = -(sys.c.transpose() * inner * &sys.c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));
    Ok(h)
}

/// Imaginary-axis eigenfrequencies `ω ≥ 0` of the level-`γ` Hamiltonian.
fn crossing_frequencies<T: Real>(sys: &StateSpace<T>, gamma: T) -> Result<Vec<T>> {
    let h = hamiltonian(sys, gamma)?;
    let guard = lit::<T>(1e-8) * (T::one() + h.norm());
    let mut freqs: Vec<T> = linalg::eigenvalues(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= guard && z.im >= T::zero())
        .map(|z| z.im)
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).expect("finite frequencies"));
    freqs.dedup_by(|a, b| (*a - *b).abs() <= lit::<T>(1e-12) * (T::one() + b.abs()));
    Ok(freqs)
}

/// H∞ norm of a stable system by the Hamiltonian level-set iteration with
/// golden-section refinement of each interval where `σ̄ > γ`.
pub fn hinf_norm<T: Real>(sys: &StateSpace<T>, rel_tol: T) -> Result<HinfResult<T>> {
    if rel_tol < lit(1e-12) || rel_tol > lit(1e-2) {
        return Err(Error::InvalidArgument(format!(
            "rel_tol {} outside [1e-12, 1e-2]",
            to_f64(rel_tol)
        )));
    }
    let spectrum = require_stable(sys)?;
    let sigma_d = linalg::norm2(&sys.d);
    let Some(spectrum) = spectrum else {
        return Ok(HinfResult {
            value: sigma_d,
            peak_frequencies: vec![T::zero()],
            peak_at_infinity: false,
            converged: true,
            iterations: 0,
        });
    };

    // candidate (ω, σ̄) samples; refined local peaks are appended as found
    let mut samples: Vec<(T, T, bool)> = Vec::new();
    let push_sample = |w: T, refined: bool, samples: &mut Vec<(T, T, bool)>| -> Result<T> {
        let s = sigma_at(sys, w)?;
        samples.push((w, s, refined));
        Ok(s)
    };
    push_sample(T::zero(), true, &mut samples)?;
    push_sample(T::one(), false, &mut samples)?;
    for z in &spectrum.eigenvalues {
        if z.im != T::zero() {
            push_sample(z.im.abs(), false, &mut samples)?;
        }
        push_sample(cabs(*z), false, &mut samples)?;
    }
    let mut gamma_lb = samples.iter().fold(sigma_d, |acc, s| acc.max(s.1));
    if gamma_lb == T::zero() {
        return Ok(HinfResult {
            value: T::zero(),
            peak_frequencies: vec![T::zero()],
            peak_at_infinity: false,
            converged: true,
            iterations: 0,
        });
    }

    let two = lit::<T>(2.0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_LEVEL_SET_ITERATIONS {
        iterations += 1;
        let gamma = (T::one() + two * rel_tol) * gamma_lb;
        let mut freqs = crossing_frequencies(sys, gamma)?;
        if freqs.is_empty() {
            converged = true;
            break;
        }
        if freqs.len() % 2 == 1 && freqs[0] > T::zero() {
            freqs.insert(0, T::zero());
        }
        let mut improved = gamma_lb;
        for pair in freqs.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mid = (lo + hi) / two;
            let s_mid = sigma_at(sys, mid)?;
            if s_mid > gamma_lb {
                let (w, s) = refine_peak(sys, lo, hi)?;
                samples.push((w, s, true));
                improved = improved.max(s);
            }
        }
        if improved <= gamma_lb * (T::one() + rel_tol) {
            // crossings without a higher interior level: numerical tangency
            gamma_lb = improved;
            converged = true;
            break;
        }
        gamma_lb = improved;
    }
    if !converged {
        return Err(Error::NoConvergence(iterations));
    }

    // unrefined samples that ended up on the peak are polished locally
    let threshold = gamma_lb * (T::one() - lit::<T>(1e-4));
    let coarse: Vec<T> = samples
        .iter()
        .filter(|s| !s.2 && s.1 >= threshold && s.0 > T::zero())
        .map(|s| s.0)
        .collect();
    for w in coarse {
        let (wr, sr) = refine_peak(sys, w * lit::<T>(0.95), w * lit::<T>(1.05))?;
        samples.push((wr, sr, true));
        gamma_lb = gamma_lb.max(sr);
    }

    let cutoff = gamma_lb * (T::one() - lit::<T>(PEAK_REL));
    let mut peaks: Vec<(T, T)> = samples
        .iter()
        .filter(|s| s.2 && s.1 >= cutoff)
        .map(|s| (s.0, s.1))
        .collect();
    peaks.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut merged: Vec<(T, T)> = Vec::new();
    for (w, s) in peaks {
        match merged.last_mut() {
            Some(last) if (w - last.0).abs() <= lit::<T>(1e-6) * (T::one() + w.abs()) => {
                if s > last.1 {
                    *last = (w, s);
                }
            }
            _ => merged.push((w, s)),
        }
    }
    Ok(HinfResult {
        value: gamma_lb,
        peak_frequencies: merged.into_iter().map(|p| p.0).collect(),
        peak_at_infinity: sigma_d >= cutoff,
        converged,
        iterations,
    })
}

/// Pole-region tuning goal: minimum decay `α`, minimum damping `ζ`,
/// maximum natural frequency `ω_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleGoal<T: Real> {
    pub min_decay: T,
    pub min_damping: T,
    pub max_frequency: T,
}

impl<T: Real> PoleGoal<T> {
    pub fn new(min_decay: T, min_damping: T, max_frequency: T) -> Result<Self> {
        if min_decay < T::zero()
            || min_damping < T::zero()
            || min_damping >= T::one()
            || max_frequency <= T::zero()
        {
            return Err(Error::InvalidArgument("pole goal out of range".into()));
        }
        Ok(Self {
            min_decay,
            min_damping,
            max_frequency,
        })
    }

    /// The three region terms for one eigenvalue: decay, damping, frequency.
    pub fn terms(&self, lambda: Complex<T>) -> [T; 3] {
        let m = cabs(lambda);
        [
            lambda.re + self.min_decay,
            lambda.re + self.min_damping * m,
            m - self.max_frequency,
        ]
    }
}

pub const POLE_ACTIVE_TOL: f64 = 1e-8;

/// Raw violation `max_λ max{Re λ + α, Re λ + ζ|λ|, |λ| - ω_max}` and the
/// indices of the eigenvalues attaining it (within `1e-8`).
pub fn pole_region_violation<T: Real>(spec: &Spectrum<T>, goal: &PoleGoal<T>) -> (T, Vec<usize>) {
    let per: Vec<T> = spec
        .eigenvalues
        .iter()
        .map(|&z| {
            let t = goal.terms(z);
            t[0].max(t[1]).max(t[2])
        })
        .collect();
    let Some(&first) = per.first() else {
        return (-T::max_value().unwrap_or_else(|| lit(f64::MAX)), Vec::new());
    };
    let v = per.iter().fold(first, |acc, &x| acc.max(x));
    let active = per
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= v - lit::<T>(POLE_ACTIVE_TOL))
        .map(|(i, _)| i)
        .collect();
    (v, active)
}
