//! Dense real state-space systems and their interconnections.

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::linalg::{self, CMatrix};
use crate::{lit, Error, Real, Result};

/// `ẋ = A x + B u`, `y = C x + D u`. `nx = 0` is a static gain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

fn check_shape<T: Real>(m: &DMatrix<T>, rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl<T: Real> StateSpace<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let nx = a.nrows();
        let (ny, nu) = d.shape();
        check_shape(&a, nx, nx, "A")?;
        check_shape(&b, nx, nu, "B")?;
        check_shape(&c, ny, nx, "C")?;
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Static gain with no states.
    pub fn gain(d: DMatrix<T>) -> Self {
        let (ny, nu) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, nu),
            c: DMatrix::zeros(ny, 0),
            d,
        }
    }

    pub fn zero(ny: usize, nu: usize) -> Self {
        Self::gain(DMatrix::zeros(ny, nu))
    }

    /// First-order lag `k / (s + p)`.
    pub fn first_order(k: T, p: T) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, -p),
            b: DMatrix::from_element(1, 1, T::one()),
            c: DMatrix::from_element(1, 1, k),
            d: DMatrix::zeros(1, 1),
        }
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.d.ncols()
    }
    pub fn ny(&self) -> usize {
        self.d.nrows()
    }

    /// Transfer matrix at an arbitrary complex point `s`.
    pub fn eval(&self, s: Complex<T>) -> Result<CMatrix<T>> {
        let d = linalg::to_complex(&self.d);
        if self.nx() == 0 {
            return Ok(d);
        }
        let x = linalg::resolvent_solve(&self.a, s, &linalg::to_complex(&self.b))?;
        Ok(linalg::to_complex(&self.c) * x + d)
    }

    /// `C (jωI - A)⁻¹ B + D`.
    pub fn freq_response(&self, omega: T) -> Result<CMatrix<T>> {
        self.eval(Complex::new(T::zero(), omega))
    }

    pub fn poles(&self) -> Result<Spectrum<T>> {
        if self.nx() == 0 {
            return Err(Error::InvalidArgument("poles of a static gain".into()));
        }
        Spectrum::of_matrix(&self.a)
    }

    /// Sub-system from the selected inputs to the selected outputs.
    pub fn channel(&self, inputs: &[usize], outputs: &[usize]) -> Result<Self> {
        if inputs.iter().any(|&i| i >= self.nu()) || outputs.iter().any(|&o| o >= self.ny()) {
            return Err(Error::DimensionMismatch(
                "channel index out of range".into(),
            ));
        }
        Ok(Self {
            a: self.a.clone(),
            b: self.b.select_columns(inputs),
            c: self.c.select_rows(outputs),
            d: self.d.select_rows(outputs).select_columns(inputs),
        })
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * k,
            d: &self.d * k,
        }
    }
}

/// Eigenvalues of a state matrix together with its spectral abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Largest real part; `-T::MAX` for an empty spectrum.
    pub abscissa: T,
}

impl<T: Real> Spectrum<T> {
    pub fn of_matrix(a: &DMatrix<T>) -> Result<Self> {
        let eigenvalues = linalg::eigenvalues(a)?;
        Ok(Self::from_eigenvalues(eigenvalues))
    }

    pub fn from_eigenvalues(eigenvalues: Vec<Complex<T>>) -> Self {
        let floor = -T::max_value().unwrap_or_else(|| lit(f64::MAX));
        let abscissa = eigenvalues.iter().fold(floor, |acc, z| acc.max(z.re));
        Self {
            eigenvalues,
            abscissa,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.abscissa < T::zero()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Generalized plant partitioned as `(w, u) → (z, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedPlant<T: Real> {
    pub a: DMatrix<T>,
    pub b1: DMatrix<T>,
    pub b2: DMatrix<T>,
    pub c1: DMatrix<T>,
    pub c2: DMatrix<T>,
    pub d11: DMatrix<T>,
    pub d12: DMatrix<T>,
    pub d21: DMatrix<T>,
    pub d22: DMatrix<T>,
}

impl<T: Real> PartitionedPlant<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<T>,
        b1: DMatrix<T>,
        b2: DMatrix<T>,
        c1: DMatrix<T>,
        c2: DMatrix<T>,
        d11: DMatrix<T>,
        d12: DMatrix<T>,
        d21: DMatrix<T>,
        d22: DMatrix<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        let (nz, nw) = d11.shape();
        let (ny, nu) = d22.shape();
        check_shape(&a, n, n, "A")?;
        check_shape(&b1, n, nw, "B1")?;
        check_shape(&b2, n, nu, "B2")?;
        check_shape(&c1, nz, n, "C1")?;
        check_shape(&c2, ny, n, "C2")?;
        check_shape(&d12, nz, nu, "D12")?;
        check_shape(&d21, ny, nw, "D21")?;
        let p = Self {
            a,
            b1,
            b2,
            c1,
            c2,
            d11,
            d12,
            d21,
            d22,
        };
        for (m, name) in p.blocks() {
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(p)
    }

    fn blocks(&self) -> [(&DMatrix<T>, &'static str); 9] {
        [
            (&self.a, "A"),
            (&self.b1, "B1"),
            (&self.b2, "B2"),
            (&self.c1, "C1"),
            (&self.c2, "C2"),
            (&self.d11, "D11"),
            (&self.d12, "D12"),
            (&self.d21, "D21"),
            (&self.d22, "D22"),
        ]
    }

    /// Builds the partition from a full realization whose last `nu` inputs
    /// are controls and last `ny` outputs are measurements.
    pub fn from_state_space(sys: &StateSpace<T>, nu: usize, ny: usize) -> Result<Self> {
        if nu > sys.nu() || ny > sys.ny() {
            return Err(Error::DimensionMismatch(
                "partition exceeds system size".into(),
            ));
        }
        let nw = sys.nu() - nu;
        let nz = sys.ny() - ny;
        let n = sys.nx();
        Self::new(
            sys.a.clone(),
            sys.b.columns(0, nw).into_owned(),
            sys.b.columns(nw, nu).into_owned(),
            sys.c.rows(0, nz).into_owned(),
            sys.c.rows(nz, ny).into_owned(),
            sys.d.view((0, 0), (nz, nw)).into_owned(),
            sys.d.view((0, nw), (nz, nu)).into_owned(),
            sys.d.view((nz, 0), (ny, nw)).into_owned(),
            sys.d.view((nz, nw), (ny, nu)).into_owned(),
        )
        .inspect(|p| debug_assert_eq!(p.nx(), n))
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nw(&self) -> usize {
        self.d11.ncols()
    }
    pub fn nz(&self) -> usize {
        self.d11.nrows()
    }
    pub fn nu(&self) -> usize {
        self.d22.ncols()
    }
    pub fn ny(&self) -> usize {
        self.d22.nrows()
    }

    /// Full realization with inputs `(w, u)` and outputs `(z, y)`.
    pub fn to_state_space(&self) -> StateSpace<T> {
        let (nw, nu, nz, ny) = (self.nw(), self.nu(), self.nz(), self.ny());
        let n = self.nx();
        let mut b = DMatrix::zeros(n, nw + nu);
        b.columns_mut(0, nw).copy_from(&self.b1);
        b.columns_mut(nw, nu).copy_from(&self.b2);
        let mut c = DMatrix::zeros(nz + ny, n);
        c.rows_mut(0, nz).copy_from(&self.c1);
        c.rows_mut(nz, ny).copy_from(&self.c2);
        let mut d = DMatrix::zeros(nz + ny, nw + nu);
        d.view_mut((0, 0), (nz, nw)).copy_from(&self.d11);
        d.view_mut((0, nw), (nz, nu)).copy_from(&self.d12);
        d.view_mut((nz, 0), (ny, nw)).copy_from(&self.d21);
        d.view_mut((nz, nw), (ny, nu)).copy_from(&self.d22);
        StateSpace {
            a: self.a.clone(),
            b,
            c,
            d,
        }
    }
}

/// `(I - M)⁻¹` after checking `σ_min(I - M) > 1e-10 (1 + scale)`.
pub(crate) fn guarded_inverse<T: Real>(loop_matrix: &DMatrix<T>, scale: T) -> Result<DMatrix<T>> {
    let n = loop_matrix.nrows();
    let m = DMatrix::<T>::identity(n, n) - loop_matrix;
    if n == 0 {
        return Ok(m);
    }
    if linalg::min_singular(&m) <= lit::<T>(1e-10) * (T::one() + scale) {
        return Err(Error::IllPosed);
    }
    m.try_inverse().ok_or(Error::IllPosed)
}

/// Loop-closing factors of the lower LFT: `Δ₁ = (I - D_K D₂₂)⁻¹`,
/// `Δ₂ = (I - D₂₂ D_K)⁻¹`.
pub(crate) fn lft_factors<T: Real>(
    p: &PartitionedPlant<T>,
    k: &StateSpace<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if k.nu() != p.ny() || k.ny() != p.nu() {
        return Err(Error::DimensionMismatch(format!(
            "controller is {}x{}, plant loop expects {}x{}",
            k.ny(),
            k.nu(),
            p.nu(),
            p.ny()
        )));
    }
    let scale = k.d.norm() * p.d22.norm();
    let delta1 = guarded_inverse(&(&k.d * &p.d22), scale)?;
    let delta2 = guarded_inverse(&(&p.d22 * &k.d), scale)?;
    Ok((delta1, delta2))
}

/// Lower linear fractional transformation `F_l(P, K)` with `u = K y`.
pub fn lft_lower<T: Real>(p: &PartitionedPlant<T>, k: &StateSpace<T>) -> Result<StateSpace<T>> {
    let (d1, d2) = lft_factors(p, k)?;
    let (np, nk) = (p.nx(), k.nx());
    let n = np + nk;
    let d1dk = &d1 * &k.d;
    let d1ck = &d1 * &k.c;
    let bkd2 = &k.b * &d2;

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (np, np))
        .copy_from(&(&p.a + &p.b2 * &d1dk * &p.c2));
    a.view_mut((0, np), (np, nk)).copy_from(&(&p.b2 * &d1ck));
    a.view_mut((np, 0), (nk, np)).copy_from(&(&bkd2 * &p.c2));
    a.view_mut((np, np), (nk, nk))
        .copy_from(&(&k.a + &bkd2 * &p.d22 * &k.c));

    let mut b = DMatrix::zeros(n, p.nw());
    b.rows_mut(0, np)
        .copy_from(&(&p.b1 + &p.b2 * &d1dk * &p.d21));
    b.rows_mut(np, nk).copy_from(&(&bkd2 * &p.d21));

    let mut c = DMatrix::zeros(p.nz(), n);
    c.columns_mut(0, np)
        .copy_from(&(&p.c1 + &p.d12 * &d1dk * &p.c2));
    c.columns_mut(np, nk).copy_from(&(&p.d12 * &d1ck));

    let d = &p.d11 + &p.d12 * &d1dk * &p.d21;
    Ok(StateSpace { a, b, c, d })
}

/// Negative feedback of `n` around `m`: the transfer `M (I + N M)⁻¹`, plus
/// the spectrum of the interconnection's state matrix.
pub fn closed_pair<T: Real>(
    m: &StateSpace<T>,
    n: &StateSpace<T>,
) -> Result<(StateSpace<T>, Spectrum<T>)> {
    if m.ny() != n.nu() || n.ny() != m.nu() {
        return Err(Error::DimensionMismatch("feedback pair dimensions".into()));
    }
    let scale = n.d.norm() * m.d.norm();
    // F = (I + D_N D_M)⁻¹, the map from the reference to the error signal
    let f = guarded_inverse(&(-(&n.d * &m.d)), scale)?;
    let (nm, nn) = (m.nx(), n.nx());
    let nt = nm + nn;
    let fdn = &f * &n.d;
    let fcn = &f * &n.c;
    let e_xm = -(&fdn * &m.c); // e = F r - F D_N C_M x_M - F C_N x_N
    let y_xm = &m.c + &m.d * &e_xm;
    let y_xn = -(&m.d * &fcn);

    let mut a = DMatrix::zeros(nt, nt);
    a.view_mut((0, 0), (nm, nm))
        .copy_from(&(&m.a + &m.b * &e_xm));
    a.view_mut((0, nm), (nm, nn)).copy_from(&(-(&m.b * &fcn)));
    a.view_mut((nm, 0), (nn, nm)).copy_from(&(&n.b * &y_xm));
    a.view_mut((nm, nm), (nn, nn))
        .copy_from(&(&n.a + &n.b * &y_xn));

    let mut b = DMatrix::zeros(nt, m.nu());
    b.rows_mut(0, nm).copy_from(&(&m.b * &f));
    b.rows_mut(nm, nn).copy_from(&(&n.b * &m.d * &f));

    let mut c = DMatrix::zeros(m.ny(), nt);
    c.columns_mut(0, nm).copy_from(&y_xm);
    c.columns_mut(nm, nn).copy_from(&y_xn);

    let d = &m.d * &f;
    let spectrum = Spectrum::of_matrix(&a)?;
    Ok((StateSpace { a, b, c, d }, spectrum))
}

/// Interconnection modes for [`compose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeMode {
    /// `systems[0]` feeds `systems[1]`, which feeds `systems[2]`, ...
    Series,
    /// Shared input, outputs stacked vertically.
    Parallel,
    /// Block-diagonal `diag(S₁, …, S_N)`.
    BlockDiag,
    /// Shared input, outputs summed.
    Sum,
}

pub fn compose<T: Real>(mode: ComposeMode, systems: &[StateSpace<T>]) -> Result<StateSpace<T>> {
    let (first, rest) = systems
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("compose needs at least one system".into()))?;
    rest.iter().try_fold(first.clone(), |acc, s| match mode {
        ComposeMode::Series => series(&acc, s),
        ComposeMode::Parallel => stack(&acc, s, false),
        ComposeMode::Sum => stack(&acc, s, true),
        ComposeMode::BlockDiag => Ok(block_diag(&acc, s)),
    })
}

fn block_diag_mat<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(x.nrows() + y.nrows(), x.ncols() + y.ncols());
    out.view_mut((0, 0), x.shape()).copy_from(x);
    out.view_mut(x.shape(), y.shape()).copy_from(y);
    out
}

fn block_diag<T: Real>(s1: &StateSpace<T>, s2: &StateSpace<T>) -> StateSpace<T> {
    StateSpace {
        a: block_diag_mat(&s1.a, &s2.a),
        b: block_diag_mat(&s1.b, &s2.b),
        c: block_diag_mat(&s1.c, &s2.c),
        d: block_diag_mat(&s1.d, &s2.d),
    }
}

fn series<T: Real>(s1: &StateSpace<T>, s2: &StateSpace<T>) -> Result<StateSpace<T>> {
    if s1.ny() != s2.nu() {
        return Err(Error::DimensionMismatch(
            "series: output/input sizes differ".into(),
        ));
    }
    let (n1, n2) = (s1.nx(), s2.nx());
    let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
    a.view_mut((0, 0), (n1, n1)).copy_from(&s1.a);
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(&s2.b * &s1.c));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&s2.a);
    let mut b = DMatrix::zeros(n1 + n2, s1.nu());
    b.rows_mut(0, n1).copy_from(&s1.b);
    b.rows_mut(n1, n2).copy_from(&(&s2.b * &s1.d));
    let mut c = DMatrix::zeros(s2.ny(), n1 + n2);
    c.columns_mut(0, n1).copy_from(&(&s2.d * &s1.c));
    c.columns_mut(n1, n2).copy_from(&s2.c);
    let d = &s2.d * &s1.d;
    Ok(StateSpace { a, b, c, d })
}

fn stack<T: Real>(s1: &StateSpace<T>, s2: &StateSpace<T>, sum: bool) -> Result<StateSpace<T>> {
    if s1.nu() != s2.nu() || (sum && s1.ny() != s2.ny()) {
        return Err(Error::DimensionMismatch(
            "parallel/sum: incompatible sizes".into(),
        ));
    }
    let a = block_diag_mat(&s1.a, &s2.a);
    let mut b = DMatrix::zeros(s1.nx() + s2.nx(), s1.nu());
    b.rows_mut(0, s1.nx()).copy_from(&s1.b);
    b.rows_mut(s1.nx(), s2.nx()).copy_from(&s2.b);
    if sum {
        let mut c = DMatrix::zeros(s1.ny(), s1.nx() + s2.nx());
        c.columns_mut(0, s1.nx()).copy_from(&s1.c);
        c.columns_mut(s1.nx(), s2.nx()).copy_from(&s2.c);
        Ok(StateSpace {
            a,
            b,
            c,
            d: &s1.d + &s2.d,
        })
    } else {
        let c = block_diag_mat(&s1.c, &s2.c);
        let mut d = DMatrix::zeros(s1.ny() + s2.ny(), s1.nu());
        d.rows_mut(0, s1.ny()).copy_from(&s1.d);
        d.rows_mut(s1.ny(), s2.ny()).copy_from(&s2.d);
        Ok(StateSpace { a, b, c, d })
    }
}

/// Frequency-domain lower star product `P₁₁ + P₁₂ K (I - P₂₂ K)⁻¹ P₂₁`.
pub fn star_product_response<T: Real>(
    p: &CMatrix<T>,
    k: &CMatrix<T>,
    nz: usize,
    nw: usize,
) -> Result<CMatrix<T>> {
    let (rows, cols) = p.shape();
    let (ny, nu) = (rows - nz, cols - nw);
    let p11 = p.view((0, 0), (nz, nw));
    let p12 = p.view((0, nw), (nz, nu));
    let p21 = p.view((nz, 0), (ny, nw));
    let p22 = p.view((nz, nw), (ny, nu));
    let m = CMatrix::<T>::identity(ny, ny) - p22 * k;
    let inner = m.lu().solve(&p21.into_owned()).ok_or(Error::IllPosed)?;
    Ok(p11 + p12 * k * inner)
}

pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    z.modulus()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn integrator_plant() -> PartitionedPlant<f64> {
        // ẋ = w + u, z = x, y = x
        PartitionedPlant::new(
            scalar(0.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_controller_disconnects_loop() {
        let p = integrator_plant();
        let k = StateSpace::zero(1, 1);
        let t = lft_lower(&p, &k).unwrap();
        assert_eq!(t.a, p.a);
        assert_eq!(t.b, p.b1);
        assert_eq!(t.c, p.c1);
        assert_eq!(t.d, p.d11);
    }

    #[test]
    fn static_gain_closes_integrator() {
        let p = integrator_plant();
        let k = StateSpace::gain(scalar(-2.5));
        let t = lft_lower(&p, &k).unwrap();
        assert!((t.a[(0, 0)] + 2.5).abs() < 1e-15);
        let g = t.freq_response(0.0).unwrap();
        assert!((g[(0, 0)].re - 1.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn ill_posed_loop_rejected() {
        let mut p = integrator_plant();
        p.d22 = scalar(1.0);
        let k = StateSpace::gain(scalar(1.0));
        assert_eq!(lft_lower(&p, &k).unwrap_err(), Error::IllPosed);
    }

    #[test]
    fn closed_pair_of_unit_gains_is_half() {
        let m = StateSpace::gain(scalar(1.0));
        let (t, spec) = closed_pair(&m, &m).unwrap();
        assert!((t.d[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(spec.is_empty());
    }

    #[test]
    fn closed_pair_with_zero_feedback_is_identity() {
        let m = StateSpace::first_order(1.0, 1.0);
        let (t, _) = closed_pair(&m, &StateSpace::zero(1, 1)).unwrap();
        for w in [0.0, 0.3, 2.0, 40.0] {
            let a = t.freq_response(w).unwrap();
            let b = m.freq_response(w).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn frequency_response_of_lag() {
        let g = StateSpace::first_order(1.0, 1.0);
        let r = g.freq_response(1.0).unwrap()[(0, 0)];
        assert!((r - Complex::new(0.5, -0.5)).norm() < 1e-15);
        assert!((r.modulus() - 0.5f64.sqrt()).abs() < 1e-15);
        let k = StateSpace::gain(scalar(0.25));
        assert_eq!(k.freq_response(7.0).unwrap()[(0, 0)].re, 0.25);
    }

    #[test]
    fn poles_of_examples() {
        let s = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let sp = s.poles().unwrap();
        assert!((sp.abscissa + 0.5).abs() < 1e-12);
        let d = StateSpace::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 2.0])),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(d.poles().unwrap().abscissa, 2.0);
        assert!(StateSpace::<f64>::zero(1, 1).poles().is_err());
    }

    #[test]
    fn compose_modes() {
        let g1 = StateSpace::first_order(1.0, 1.0);
        let g2 = StateSpace::first_order(1.0, 2.0);
        let s = compose(ComposeMode::Series, &[g1.clone(), g2.clone()]).unwrap();
        assert!((s.freq_response(0.0).unwrap()[(0, 0)].re - 0.5).abs() < 1e-15);
        let bd = compose(ComposeMode::BlockDiag, &[g1.clone(), g2.clone()]).unwrap();
        assert_eq!((bd.nx(), bd.ny(), bd.nu()), (2, 2, 2));
        assert_eq!(bd.a[(0, 1)], 0.0);
        let k0 = StateSpace::gain(DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]));
        let k = StateSpace::gain(DMatrix::from_row_slice(1, 3, &[-1.049, -1.049, -0.05402]));
        let sum = compose(ComposeMode::Sum, &[k0, k]).unwrap();
        assert!((sum.d[(0, 2)] - (1.0 - 0.05402)).abs() < 1e-15);
        assert!(compose(ComposeMode::Series, &[sum.clone(), sum]).is_err());
    }
}
