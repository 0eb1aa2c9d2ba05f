//! Dense linear-algebra kernels shared by the norm, sensitivity and
//! simulation code: eigenvalues, continuous Lyapunov solves, complex
//! resolvents and singular triples.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};

use crate::{lit, Error, Real, Result};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|v| Complex::new(v, T::zero()))
}

pub fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Largest singular value of a real matrix (0 for empty matrices).
pub fn norm2<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

/// Smallest singular value of a real square matrix.
pub fn min_singular<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::max_value().unwrap_or_else(|| lit(f64::MAX));
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().skip(1).fold(sv[0], |acc, &s| acc.min(s))
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(a) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let schur = Schur::try_new(a.clone(), T::default_epsilon(), 1000 * n.max(10))
        .ok_or(Error::Eigensolver)?;
    let eig = schur.complex_eigenvalues();
    let out: Vec<Complex<T>> = eig.iter().copied().collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver);
    }
    Ok(out)
}

/// Solves `A X + X Aᵀ + Q = 0` with a Bartels–Stewart scheme on the real
/// Schur form of `A`; falls back to the Kronecker formulation for small
/// orders when the Schur factorization is unavailable.
pub fn lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch("lyapunov operands".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    match bartels_stewart(a, q) {
        Some(x) => Ok(x),
        None if n <= 30 => lyapunov_kron(a, q),
        None => Err(Error::Eigensolver),
    }
}

fn bartels_stewart<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let (u, t) = Schur::try_new(a.clone(), T::default_epsilon(), 1000 * n.max(10))?.unpack();
    // block boundaries of the quasi-triangular factor
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != T::zero() {
            if i + 2 < n && t[(i + 2, i + 1)] != T::zero() {
                return None;
            }
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    // T Y + Y Tᵀ = C with Y = Uᵀ X U, C = -Uᵀ Q U
    let c = -(u.transpose() * q * &u);
    let mut y = DMatrix::<T>::zeros(n, n);
    for &(j, b) in blocks.iter().rev() {
        let mut rhs = c.columns(j, b).into_owned();
        let tail = j + b;
        if tail < n {
            let t_jk = t.view((j, tail), (b, n - tail));
            rhs -= y.columns(tail, n - tail) * t_jk.transpose();
        }
        if b == 1 {
            let mut m = t.clone();
            let s = t[(j, j)];
            for k in 0..n {
                m[(k, k)] += s;
            }
            let sol = m.lu().solve(&rhs)?;
            y.set_column(j, &sol.column(0));
        } else {
            // (I ⊗ T + M ⊗ I) vec(Y_J) = vec(rhs), M = T_JJ
            let mjj = t.view((j, j), (2, 2)).into_owned();
            let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
            for blk in 0..2 {
                big.view_mut((blk * n, blk * n), (n, n)).copy_from(&t);
            }
            for r in 0..2 {
                for s in 0..2 {
                    let coef = mjj[(r, s)];
                    for k in 0..n {
                        big[(r * n + k, s * n + k)] += coef;
                    }
                }
            }
            let mut v = DVector::<T>::zeros(2 * n);
            for r in 0..2 {
                for k in 0..n {
                    v[r * n + k] = rhs[(k, r)];
                }
            }
            let sol = big.lu().solve(&v)?;
            for r in 0..2 {
                for k in 0..n {
                    y[(k, j + r)] = sol[r * n + k];
                }
            }
        }
    }
    let x = &u * y * u.transpose();
    let x = (&x + x.transpose()) * lit::<T>(0.5);
    if all_finite(&x) {
        Some(x)
    } else {
        None
    }
}

/// Kronecker-product Lyapunov solve, `(I ⊗ A + A ⊗ I) vec X = -vec Q`.
pub fn lyapunov_kron<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let mut big = DMatrix::<T>::zeros(n * n, n * n);
    // column-major vec: vec(AX)_(i + n j) = sum_k A_ik X_kj ; vec(XAᵀ)_(i+nj) = sum_k X_ik A_jk
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for k in 0..n {
                big[(row, k + n * j)] += a[(i, k)];
                big[(row, i + n * k)] += a[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, q.iter().map(|&v| -v));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Kronecker Lyapunov operator"))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * lit::<T>(0.5))
}

/// Solves `(s I - A) X = rhs` in complex arithmetic, reporting resolvent
/// breakdown when a pivot falls below `1e-12 (1 + ‖A‖_F)`.
pub fn resolvent_solve<T: Real>(
    a: &DMatrix<T>,
    s: Complex<T>,
    rhs: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, rhs.ncols()));
    }
    let mut m = to_complex(a).map(|z| -z);
    for k in 0..n {
        m[(k, k)] += s;
    }
    let lu = m.lu();
    let guard = lit::<T>(1e-12) * (T::one() + a.norm());
    let u = lu.u();
    if (0..n).any(|k| u[(k, k)].modulus() <= guard) {
        return Err(Error::ResolventSingular(crate::to_f64(s.im)));
    }
    lu.solve(rhs)
        .ok_or(Error::ResolventSingular(crate::to_f64(s.im)))
}

/// Largest singular triple of a complex matrix: `(σ₁, σ₂, u, v)` with
/// `M v = σ₁ u`; `σ₂` is 0 when the matrix has a single singular value.
pub struct SingularTriple<T: Real> {
    pub sigma: T,
    pub second: T,
    pub u: CVector<T>,
    pub v: CVector<T>,
}

pub fn top_singular<T: Real>(m: &CMatrix<T>) -> SingularTriple<T> {
    let (p, q) = m.shape();
    if p == 0 || q == 0 {
        return SingularTriple {
            sigma: T::zero(),
            second: T::zero(),
            u: CVector::zeros(p),
            v: CVector::zeros(q),
        };
    }
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let mut best = 0;
    for k in 1..sv.len() {
        if sv[k] > sv[best] {
            best = k;
        }
    }
    let second = sv
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != best)
        .fold(T::zero(), |acc, (_, &s)| acc.max(s));
    let u = svd
        .u
        .as_ref()
        .expect("left vectors")
        .column(best)
        .into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("right vectors")
        .row(best)
        .adjoint()
        .into_owned();
    SingularTriple {
        sigma: sv[best],
        second,
        u,
        v,
    }
}

pub fn sigma_max<T: Real>(m: &CMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

/// Right and left eigenvectors of `A` for the eigenvalue `lambda`, taken as
/// the singular vectors of `A - λI` for its smallest singular value. The
/// pair is scaled so that `wᴴ v = 1`; the returned condition is `|wᴴ v|`
/// for unit-norm vectors (small values flag a defective eigenvalue).
pub struct EigenPair<T: Real> {
    pub right: CVector<T>,
    pub left: CVector<T>,
    pub condition: T,
}

pub fn eigenvector_pair<T: Real>(a: &DMatrix<T>, lambda: Complex<T>) -> EigenPair<T> {
    let n = a.nrows();
    let mut m = to_complex(a);
    for k in 0..n {
        m[(k, k)] -= lambda;
    }
    let svd = m.svd(true, true);
    let sv = &svd.singular_values;
    let mut small = 0;
    for k in 1..sv.len() {
        if sv[k] < sv[small] {
            small = k;
        }
    }
    let w = svd
        .u
        .as_ref()
        .expect("left vectors")
        .column(small)
        .into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("right vectors")
        .row(small)
        .adjoint()
        .into_owned();
    let c = w.dotc(&v);
    let condition = c.modulus();
    let right = if condition > T::zero() {
        v.map(|z| z / c)
    } else {
        v
    };
    EigenPair {
        right,
        left: w,
        condition,
    }
}
