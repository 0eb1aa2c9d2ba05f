//! Convex quadratic programs over the unit simplex,
//!
//! ```text
//! minimize ½ λᵀ H λ + fᵀ λ   subject to  λ ≥ 0, Σ λ = 1,
//! ```
//!
//! solved by a primal active-set method. `H` must be symmetric positive
//! semidefinite; a tiny diagonal shift keeps the reduced KKT systems regular
//! when planes are duplicated.

use nalgebra::{DMatrix, DVector};

use crate::{lit, Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQpSolution<T: Real> {
    pub lambda: DVector<T>,
    pub objective: T,
    /// Common value of the gradient `Hλ + f` on the support (the negated
    /// multiplier of the equality constraint).
    pub level: T,
    pub iterations: usize,
}

impl<T: Real> SimplexQpSolution<T> {
    /// Duality gap `λᵀ(Hλ + f) − min_i (Hλ + f)_i`, zero at the optimum.
    pub fn gap(&self, h: &DMatrix<T>, f: &DVector<T>) -> T {
        let grad = h * &self.lambda + f;
        let min = grad.iter().copied().fold(grad[0], |a, b| a.min(b));
        self.lambda.dot(&grad) - min
    }
}

const ZERO_TOL: f64 = 1e-12;

pub fn solve_simplex_qp<T: Real>(h: &DMatrix<T>, f: &DVector<T>) -> Result<SimplexQpSolution<T>> {
    let m = f.len();
    if m == 0 || h.nrows() != m || h.ncols() != m {
        return Err(Error::QpFailure(format!(
            "bad QP shapes: H {:?}, f {}",
            h.shape(),
            m
        )));
    }
    if h.iter().chain(f.iter()).any(|v| !v.is_finite()) {
        return Err(Error::QpFailure("non-finite QP data".into()));
    }
    let scale = (0..m)
        .map(|i| h[(i, i)].abs())
        .fold(T::one(), |a, b| a.max(b));
    let shift = lit::<T>(1e-13) * scale;
    let mut hr = h.clone();
    for i in 0..m {
        hr[(i, i)] += shift;
    }
    // λ lives on the simplex, so its tolerance is absolute; gradient
    // comparisons scale with the data
    let lam_tol = lit::<T>(ZERO_TOL);
    let tol = lit::<T>(ZERO_TOL) * (scale + f.amax());

    // start at the best vertex
    let start = (0..m)
        .min_by(|&i, &j| {
            let vi = lit::<T>(0.5) * h[(i, i)] + f[i];
            let vj = lit::<T>(0.5) * h[(j, j)] + f[j];
            vi.partial_cmp(&vj).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut lambda = DVector::zeros(m);
    lambda[start] = T::one();
    let mut support = vec![start];

    let max_iter = 20 * m + 50;
    for it in 0..max_iter {
        let target = reduced_kkt(&hr, f, &support)?;
        let feasible = target.iter().all(|&v| v >= -lam_tol);
        if feasible {
            for (k, &i) in support.iter().enumerate() {
                lambda[i] = target[k].max(T::zero());
            }
            let s = lambda.sum();
            lambda /= s;
            let grad = &hr * &lambda + f;
            let level = lambda.dot(&grad);
            let entering = (0..m).filter(|i| !support.contains(i)).min_by(|&i, &j| {
                grad[i]
                    .partial_cmp(&grad[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            match entering {
                Some(j) if grad[j] < level - tol => support.push(j),
                _ => {
                    let objective = lit::<T>(0.5) * lambda.dot(&(h * &lambda)) + f.dot(&lambda);
                    return Ok(SimplexQpSolution {
                        lambda,
                        objective,
                        level,
                        iterations: it + 1,
                    });
                }
            }
        } else {
            // ratio test along lambda -> target, drop the blocking index
            let mut alpha = T::one();
            let mut blocking = None;
            for (k, &i) in support.iter().enumerate() {
                let d = target[k] - lambda[i];
                if target[k] < -lam_tol && d < T::zero() {
                    let a = -lambda[i] / d;
                    if a < alpha {
                        alpha = a;
                        blocking = Some(k);
                    }
                }
            }
            for (k, &i) in support.iter().enumerate() {
                let li = lambda[i];
                lambda[i] = li + alpha * (target[k] - li);
            }
            let k = blocking.unwrap_or_else(|| {
                (0..support.len())
                    .min_by(|&a, &b| {
                        target[a]
                            .partial_cmp(&target[b])
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap_or(0)
            });
            lambda[support[k]] = T::zero();
            support.remove(k);
            for &i in &support {
                lambda[i] = lambda[i].max(T::zero());
            }
            let s = lambda.sum();
            if s <= T::zero() {
                return Err(Error::QpFailure("active set collapsed".into()));
            }
            lambda /= s;
        }
    }
    Err(Error::QpFailure(format!(
        "no convergence in {max_iter} active-set iterations"
    )))
}

/// Minimizer of the quadratic on the affine hull of the support.
fn reduced_kkt<T: Real>(h: &DMatrix<T>, f: &DVector<T>, support: &[usize]) -> Result<DVector<T>> {
    let k = support.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = h[(i, j)];
        }
        kkt[(a, k)] = T::one();
        kkt[(k, a)] = T::one();
        rhs[a] = -f[i];
    }
    rhs[k] = T::one();
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| kkt.svd(true, true).solve(&rhs, lit(1e-14)).ok())
        .ok_or_else(|| Error::QpFailure("singular reduced KKT system".into()))?;
    Ok(sol.rows(0, k).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_variable() {
        let s = solve_simplex_qp(
            &DMatrix::from_element(1, 1, 2.0f64),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert_eq!(s.lambda[0], 1.0);
        assert!((s.objective - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        // planes ±1 of |x|: H = g gᵀ
        let h = DMatrix::from_row_slice(2, 2, &[1.0f64, -1.0, -1.0, 1.0]);
        let f = DVector::from_row_slice(&[0.0, 0.0]);
        let s = solve_simplex_qp(&h, &f).unwrap();
        assert!((s.lambda[0] - 0.5).abs() < 1e-10);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn duplicated_planes() {
        let h = DMatrix::from_element(3, 3, 1.0f64);
        let f = DVector::from_row_slice(&[0.0, -1.0, -1.0]);
        let s = solve_simplex_qp(&h, &f).unwrap();
        assert!(s.lambda[0].abs() < 1e-12);
        assert!((s.lambda.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ill_scaled_nearly_collinear_bundle() {
        // 50 planes of a valley-shaped function at a tiny proximity weight
        let tau = 1e-6;
        let gm = DMatrix::from_fn(2, 50, |r, j| {
            let t = j as f64 / 49.0;
            if r == 0 {
                2.2 - 0.1 * t + 1e-3 * (7.0 * t).sin()
            } else {
                -1.0 + 1e-4 * t
            }
        });
        let h = gm.transpose() * &gm / tau;
        let f = DVector::from_fn(50, |j, _| 2.2 + 0.4 * ((j as f64) * 0.37).cos() * 1e-3);
        let s = solve_simplex_qp(&h, &f).unwrap();
        assert!(s.lambda.iter().all(|&v| v >= -1e-12));
        assert!((s.lambda.sum() - 1.0).abs() <= 1e-10);
        let scale = h.amax() + f.amax();
        assert!(s.gap(&h, &f) <= 1e-8 * scale, "gap {}", s.gap(&h, &f));
    }

    proptest! {
        #[test]
        fn optimality_conditions(
            g in proptest::collection::vec(-3.0f64..3.0, 12),
            f in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            // H = Gᵀ G with G 2×6
            let gm = DMatrix::from_row_slice(2, 6, &g);
            let h = gm.transpose() * &gm;
            let f = DVector::from_vec(f);
            let s = solve_simplex_qp(&h, &f).unwrap();
            prop_assert!(s.lambda.iter().all(|&v| v >= -1e-12));
            prop_assert!((s.lambda.sum() - 1.0).abs() <= 1e-10);
            prop_assert!(s.gap(&h, &f) <= 1e-8);
        }
    }
}
