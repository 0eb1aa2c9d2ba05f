//! Derivatives of the requirement functionals with respect to the tunable
//! parameters, chained through the controller parameterization and the
//! lower LFT.

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg::{self, CMatrix};
use crate::norms::{self, HinfResult, PoleGoal};
use crate::ss::{self, cabs, PartitionedPlant, Spectrum, StateSpace};
use crate::{lit, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacEntry<T: Real> {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub value: T,
}

/// Sparse derivative of a controller realization: for every parameter the
/// nonzero entries of `∂(A_K, B_K, C_K, D_K)/∂x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJacobian<T: Real> {
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,
    pub entries: Vec<Vec<JacEntry<T>>>,
}

impl<T: Real> ParamJacobian<T> {
    pub fn new(nx: usize, nu: usize, ny: usize, n_params: usize) -> Self {
        Self {
            nx,
            nu,
            ny,
            entries: vec![Vec::new(); n_params],
        }
    }

    pub fn n_params(&self) -> usize {
        self.entries.len()
    }

    pub fn push(&mut self, k: usize, block: Block, row: usize, col: usize, value: T) {
        self.entries[k].push(JacEntry {
            block,
            row,
            col,
            value,
        });
    }

    /// Dense derivative quadruple for parameter `k`.
    pub fn dense(&self, k: usize) -> SystemDerivative<T> {
        let mut out = SystemDerivative::zeros(self.nx, self.nu, self.ny);
        for e in &self.entries[k] {
            let m = match e.block {
                Block::A => &mut out.da,
                Block::B => &mut out.db,
                Block::C => &mut out.dc,
                Block::D => &mut out.dd,
            };
            m[(e.row, e.col)] += e.value;
        }
        out
    }
}

/// Derivative of a realization `(A, B, C, D)` along one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDerivative<T: Real> {
    pub da: DMatrix<T>,
    pub db: DMatrix<T>,
    pub dc: DMatrix<T>,
    pub dd: DMatrix<T>,
}

impl<T: Real> SystemDerivative<T> {
    pub fn zeros(nx: usize, nu: usize, ny: usize) -> Self {
        Self {
            da: DMatrix::zeros(nx, nx),
            db: DMatrix::zeros(nx, nu),
            dc: DMatrix::zeros(ny, nx),
            dd: DMatrix::zeros(ny, nu),
        }
    }

    pub fn channel(&self, inputs: &[usize], outputs: &[usize]) -> Self {
        Self {
            da: self.da.clone(),
            db: self.db.select_columns(inputs),
            dc: self.dc.select_rows(outputs),
            dd: self.dd.select_rows(outputs).select_columns(inputs),
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.da, &self.db, &self.dc, &self.dd]
            .iter()
            .all(|m| m.iter().all(|v| *v == T::zero()))
    }
}

/// What produced a subgradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source<T: Real> {
    Frequency(T),
    Infinity,
    Eigenvalue { index: usize, value: Complex<T> },
    H2,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient<T: Real> {
    pub vector: DVector<T>,
    pub source: Source<T>,
    /// Singular value or eigenvalue was (nearly) repeated at the source.
    pub degenerate: bool,
}

impl<T: Real> Subgradient<T> {
    pub fn scaled(mut self, k: T) -> Self {
        self.vector *= k;
        self
    }
}

/// Differentiates `lft_lower(p, k)` along every parameter of `jac`.
pub fn closed_loop_jacobian<T: Real>(
    p: &PartitionedPlant<T>,
    k: &StateSpace<T>,
    jac: &ParamJacobian<T>,
) -> Result<Vec<SystemDerivative<T>>> {
    let (d1, d2) = ss::lft_factors(p, k)?;
    if jac.nx != k.nx() || jac.nu != k.nu() || jac.ny != k.ny() {
        return Err(Error::DimensionMismatch(
            "jacobian does not match controller".into(),
        ));
    }
    let (np, nk) = (p.nx(), k.nx());
    let n = np + nk;
    (0..jac.n_params())
        .map(|idx| {
            if jac.entries[idx].is_empty() {
                return Ok(SystemDerivative::zeros(n, p.nw(), p.nz()));
            }
            let dk = jac.dense(idx);
            let dd1 = &d1 * &dk.dd * &p.d22 * &d1;
            let dd2 = &d2 * &p.d22 * &dk.dd * &d2;
            // ∂(Δ₁ D_K), ∂(Δ₁ C_K), ∂(B_K Δ₂)
            let g_dk = &dd1 * &k.d + &d1 * &dk.dd;
            let g_ck = &dd1 * &k.c + &d1 * &dk.dc;
            let g_bk = &dk.db * &d2 + &k.b * &dd2;

            let mut da = DMatrix::zeros(n, n);
            da.view_mut((0, 0), (np, np))
                .copy_from(&(&p.b2 * &g_dk * &p.c2));
            da.view_mut((0, np), (np, nk)).copy_from(&(&p.b2 * &g_ck));
            da.view_mut((np, 0), (nk, np)).copy_from(&(&g_bk * &p.c2));
            let bkd2 = &k.b * &d2;
            da.view_mut((np, np), (nk, nk))
                .copy_from(&(&dk.da + &g_bk * &p.d22 * &k.c + &bkd2 * &p.d22 * &dk.dc));

            let mut db = DMatrix::zeros(n, p.nw());
            db.rows_mut(0, np).copy_from(&(&p.b2 * &g_dk * &p.d21));
            db.rows_mut(np, nk).copy_from(&(&g_bk * &p.d21));

            let mut dc = DMatrix::zeros(p.nz(), n);
            dc.columns_mut(0, np).copy_from(&(&p.d12 * &g_dk * &p.c2));
            dc.columns_mut(np, nk).copy_from(&(&p.d12 * &g_ck));

            let dd = &p.d12 * &g_dk * &p.d21;
            Ok(SystemDerivative { da, db, dc, dd })
        })
        .collect()
}

/// Degeneracy threshold `σ₁ - σ₂ < 1e-9 σ₁`.
const SVD_GAP: f64 = 1e-9;

/// One Clarke subgradient per active H∞ frequency (and one for `ω = ∞`
/// when the supremum is attained there).
pub fn hinf_subgradients<T: Real>(
    clp: &StateSpace<T>,
    dquads: &[SystemDerivative<T>],
    peaks: &HinfResult<T>,
) -> Result<Vec<Subgradient<T>>> {
    let n = dquads.len();
    let mut out = Vec::new();
    let c_cplx = linalg::to_complex(&clp.c);
    for &w in &peaks.peak_frequencies {
        let s = Complex::new(T::zero(), w);
        let t = clp.freq_response(w)?;
        let triple = linalg::top_singular(&t);
        let degenerate = triple.sigma - triple.second < lit::<T>(SVD_GAP) * triple.sigma;
        let mut g = DVector::zeros(n);
        if clp.nx() == 0 {
            for (k, dq) in dquads.iter().enumerate() {
                g[k] = bilinear(&triple.u, &linalg::to_complex(&dq.dd), &triple.v);
            }
        } else {
            // right = R B v, left = uᴴ C R
            let bv = linalg::to_complex(&clp.b) * &triple.v;
            let right = linalg::resolvent_solve(
                &clp.a,
                s,
                &CMatrix::from_column_slice(bv.len(), 1, bv.as_slice()),
            )?;
            let cu = c_cplx.adjoint() * &triple.u;
            let a_h = linalg::to_complex(&clp.a).adjoint();
            let left_h = resolvent_adjoint_solve(&a_h, s, &cu)?;
            let left = left_h.adjoint(); // 1 x nx row = uᴴ C R
            let right = right.column(0).into_owned();
            for (k, dq) in dquads.iter().enumerate() {
                let dc = linalg::to_complex(&dq.dc);
                let da = linalg::to_complex(&dq.da);
                let db = linalg::to_complex(&dq.db);
                let dd = linalg::to_complex(&dq.dd);
                let term = triple.u.dotc(&(&dc * &right))
                    + (&left * &da * &right)[(0, 0)]
                    + (&left * &db * &triple.v)[(0, 0)]
                    + triple.u.dotc(&(&dd * &triple.v));
                g[k] = term.re;
            }
        }
        out.push(Subgradient {
            vector: g,
            source: Source::Frequency(w),
            degenerate,
        });
    }
    if peaks.peak_at_infinity {
        let d = linalg::to_complex(&clp.d);
        let triple = linalg::top_singular(&d);
        let degenerate = triple.sigma - triple.second < lit::<T>(SVD_GAP) * triple.sigma;
        let g = DVector::from_iterator(
            n,
            dquads
                .iter()
                .map(|dq| bilinear(&triple.u, &linalg::to_complex(&dq.dd), &triple.v)),
        );
        out.push(Subgradient {
            vector: g,
            source: Source::Infinity,
            degenerate,
        });
    }
    Ok(out)
}

fn bilinear<T: Real>(u: &linalg::CVector<T>, m: &CMatrix<T>, v: &linalg::CVector<T>) -> T {
    u.dotc(&(m * v)).re
}

/// Solves `(s I - A)ᴴ x = rhs`, given `Aᴴ`.
fn resolvent_adjoint_solve<T: Real>(
    a_h: &CMatrix<T>,
    s: Complex<T>,
    rhs: &linalg::CVector<T>,
) -> Result<CMatrix<T>> {
    let n = a_h.nrows();
    let mut m = a_h.map(|z| -z);
    for k in 0..n {
        m[(k, k)] += s.conj();
    }
    m.lu()
        .solve(&CMatrix::from_column_slice(n, 1, rhs.as_slice()))
        .ok_or(Error::ResolventSingular(crate::to_f64(s.im)))
}

/// Gradient of the H₂ norm via the two Gramians.
pub fn h2_gradient<T: Real>(
    clp: &StateSpace<T>,
    dquads: &[SystemDerivative<T>],
) -> Result<Subgradient<T>> {
    if clp.d.iter().any(|&v| v != T::zero())
        || dquads.iter().any(|q| q.dd.iter().any(|&v| v != T::zero()))
    {
        return Err(Error::NonzeroFeedthrough);
    }
    let n = dquads.len();
    if clp.nx() == 0 {
        return Ok(Subgradient {
            vector: DVector::zeros(n),
            source: Source::H2,
            degenerate: false,
        });
    }
    let gr = norms::gramians(clp)?;
    let (x, y) = (&gr.controllability, &gr.observability);
    let norm_sq = (&clp.c * x * clp.c.transpose()).trace();
    let norm = norm_sq.max(T::zero()).sqrt();
    let mut g = DVector::zeros(n);
    if norm > T::zero() {
        let two = lit::<T>(2.0);
        for (k, dq) in dquads.iter().enumerate() {
            if dq.is_zero() {
                continue;
            }
            let inner = &dq.da * x
                + x * dq.da.transpose()
                + &dq.db * clp.b.transpose()
                + &clp.b * dq.db.transpose();
            let d_sq = (y * inner).trace() + (&dq.dc * x * clp.c.transpose()).trace() * two;
            g[k] = d_sq / (two * norm);
        }
    }
    Ok(Subgradient {
        vector: g,
        source: Source::H2,
        degenerate: false,
    })
}

/// Condition threshold below which an eigenvalue is treated as defective.
const DEFECTIVE_COND: f64 = 1e-8;
const POLE_FD_STEP: f64 = 1e-7;

/// Subgradients of the pole-region violation for the active eigenvalues.
/// Tied region terms of one eigenvalue each contribute a subgradient.
pub fn pole_subgradients<T: Real>(
    clp: &StateSpace<T>,
    dquads: &[SystemDerivative<T>],
    goal: &PoleGoal<T>,
    spectrum: &Spectrum<T>,
    active: &[usize],
) -> Result<Vec<Subgradient<T>>> {
    let n = dquads.len();
    let mut out = Vec::new();
    let tie = lit::<T>(norms::POLE_ACTIVE_TOL);
    for &idx in active {
        let lambda = spectrum.eigenvalues[idx];
        let pair = linalg::eigenvector_pair(&clp.a, lambda);
        if pair.condition < lit(DEFECTIVE_COND) {
            out.push(Subgradient {
                vector: pole_fd_subgradient(clp, dquads, goal)?,
                source: Source::FiniteDifference,
                degenerate: true,
            });
            continue;
        }
        let dl: Vec<Complex<T>> = dquads
            .iter()
            .map(|dq| {
                let av = linalg::to_complex(&dq.da) * &pair.right;
                pair.left.dotc(&av)
            })
            .collect();
        let terms = goal.terms(lambda);
        let top = terms[0].max(terms[1]).max(terms[2]);
        let m = cabs(lambda);
        for (t, &value) in terms.iter().enumerate() {
            if value < top - tie {
                continue;
            }
            let g = DVector::from_iterator(
                n,
                dl.iter().map(|&d| {
                    let dmod = if m > T::zero() {
                        (lambda.conj() * d).re / m
                    } else {
                        T::zero()
                    };
                    match t {
                        0 => d.re,
                        1 => d.re + goal.min_damping * dmod,
                        _ => dmod,
                    }
                }),
            );
            out.push(Subgradient {
                vector: g,
                source: Source::Eigenvalue {
                    index: idx,
                    value: lambda,
                },
                degenerate: false,
            });
        }
    }
    Ok(out)
}

fn pole_fd_subgradient<T: Real>(
    clp: &StateSpace<T>,
    dquads: &[SystemDerivative<T>],
    goal: &PoleGoal<T>,
) -> Result<DVector<T>> {
    let h = lit::<T>(POLE_FD_STEP);
    let base = norms::pole_region_violation(&Spectrum::of_matrix(&clp.a)?, goal).0;
    let mut g = DVector::zeros(dquads.len());
    for (k, dq) in dquads.iter().enumerate() {
        let a = &clp.a + &dq.da * h;
        let v = norms::pole_region_violation(&Spectrum::of_matrix(&a)?, goal).0;
        g[k] = (v - base) / h;
    }
    Ok(g)
}

/// Subgradients of the spectral abscissa (used by the stabilization phase).
pub fn abscissa_subgradients<T: Real>(
    clp: &StateSpace<T>,
    dquads: &[SystemDerivative<T>],
    spectrum: &Spectrum<T>,
) -> Result<Vec<Subgradient<T>>> {
    let tie = lit::<T>(norms::POLE_ACTIVE_TOL);
    let mut out = Vec::new();
    for (idx, &lambda) in spectrum.eigenvalues.iter().enumerate() {
        if lambda.re < spectrum.abscissa - tie || lambda.im < T::zero() {
            continue;
        }
        let pair = linalg::eigenvector_pair(&clp.a, lambda);
        let vector = if pair.condition < lit(DEFECTIVE_COND) {
            let h = lit::<T>(POLE_FD_STEP);
            DVector::from_iterator(
                dquads.len(),
                dquads.iter().map(|dq| {
                    let a = &clp.a + &dq.da * h;
                    Spectrum::of_matrix(&a)
                        .map(|s| (s.abscissa - spectrum.abscissa) / h)
                        .unwrap_or_else(|_| T::zero())
                }),
            )
        } else {
            DVector::from_iterator(
                dquads.len(),
                dquads.iter().map(|dq| {
                    let av = linalg::to_complex(&dq.da) * &pair.right;
                    pair.left.dotc(&av).re
                }),
            )
        };
        out.push(Subgradient {
            vector,
            source: Source::Eigenvalue {
                index: idx,
                value: lambda,
            },
            degenerate: pair.condition < lit(DEFECTIVE_COND),
        });
    }
    Ok(out)
}

/// Central finite differences with step `h (1 + |x_k|)`.
pub fn finite_diff_gradient<T, F>(mut f: F, x: &DVector<T>, h: T) -> Result<DVector<T>>
where
    T: Real,
    F: FnMut(&DVector<T>) -> Result<T>,
{
    let mut g = DVector::zeros(x.len());
    let two = lit::<T>(2.0);
    for k in 0..x.len() {
        let step = h * (T::one() + x[k].abs());
        let mut xp = x.clone();
        xp[k] += step;
        let mut xm = x.clone();
        xm[k] -= step;
        g[k] = (f(&xp)? - f(&xm)?) / (two * step);
    }
    Ok(g)
}
