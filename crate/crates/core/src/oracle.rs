//! Independent reference computations used to validate the fast
//! algorithms: random stable test systems, a brute-force H∞ search and an
//! H₂ norm by frequency-domain quadrature.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rayon::prelude::*;

use crate::linalg::sigma_max;
use crate::ss::StateSpace;
use crate::Result;

/// Random stable system with `nx` states; the spectrum is shifted so that
/// its abscissa lies in `[-1, -0.05]`. `proper` adds a random feedthrough.
pub fn random_stable<R: Rng>(
    rng: &mut R,
    nx: usize,
    nu: usize,
    ny: usize,
    proper: bool,
) -> StateSpace<f64> {
    let mut m = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let mut a = m(nx, nx);
    let b = m(nx, nu);
    let c = m(ny, nx);
    let d = if proper {
        m(ny, nu)
    } else {
        DMatrix::zeros(ny, nu)
    };
    if nx > 0 {
        let abscissa = crate::ss::Spectrum::of_matrix(&a)
            .expect("random spectrum")
            .abscissa;
        let margin = rng.random_range(0.05..1.0);
        for i in 0..nx {
            a[(i, i)] -= abscissa + margin;
        }
    }
    StateSpace::new(a, b, c, d).expect("random system")
}

fn sigma_at(sys: &StateSpace<f64>, w: f64) -> f64 {
    sys.freq_response(w)
        .map(|g| sigma_max(&g))
        .unwrap_or(f64::INFINITY)
}

/// Brute-force H∞ norm: `points` log-spaced frequencies over `[lo, hi]`,
/// plus `ω = 0` and `ω = ∞`, with golden-section refinement around the five
/// best local maxima of the grid. Returns `(value, frequency)`.
pub fn hinf_grid(sys: &StateSpace<f64>, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let (l0, l1) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect();
    let vals: Vec<f64> = grid.par_iter().map(|&w| sigma_at(sys, w)).collect();
    let mut peaks: Vec<usize> = (0..points)
        .filter(|&i| {
            (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == points || vals[i] >= vals[i + 1])
        })
        .collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    peaks.truncate(5);
    let mut best = (sigma_at(sys, 0.0), 0.0);
    let at_inf = sigma_max(&sys.d.map(|v| Complex::new(v, 0.0)));
    if at_inf > best.0 {
        best = (at_inf, f64::INFINITY);
    }
    for i in peaks {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(points - 1)];
        let (v, w) = golden_max(|w| sigma_at(sys, w), a, b, vals[i], grid[i]);
        if v > best.0 {
            best = (v, w);
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, v0: f64, w0: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let (v, w) = if fc > fd { (fc, c) } else { (fd, d) };
    if v >= v0 {
        (v, w)
    } else {
        (v0, w0)
    }
}

/// H₂ norm from `‖G‖₂² = (1/π) ∫₀^∞ ‖G(jω)‖_F² dω`, integrated in
/// `θ = atan ω` with tanh-sinh quadrature on pieces split at the pole
/// moduli and imaginary parts.
pub fn h2_quadrature(sys: &StateSpace<f64>, tol: f64) -> Result<f64> {
    let spec = sys.poles()?;
    let mut cuts: Vec<f64> = spec
        .eigenvalues
        .iter()
        .flat_map(|z| [z.im.abs(), z.norm()])
        .filter(|w| *w > 0.0)
        .map(f64::atan)
        .collect();
    cuts.push(0.0);
    cuts.push(FRAC_PI_2);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let integrand = |t: f64| {
        let w = t.tan();
        let sec2 = 1.0 + w * w;
        sys.freq_response(w)
            .map(|g| g.norm_squared() * sec2)
            .unwrap_or(f64::NAN)
    };
    let mut total = 0.0;
    for win in cuts.windows(2) {
        total += quadrature::integrate(integrand, win[0], win[1], tol).integral;
    }
    Ok((total / PI).sqrt())
}
