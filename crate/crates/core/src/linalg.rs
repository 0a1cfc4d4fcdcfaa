//! Small dense symmetric / Hermitian matrix kernel.
//!
//! Everything here is sized for phase-space problems (a few dozen rows at
//! most). Eigendecompositions use the cyclic Jacobi method, which is slow
//! asymptotically but unconditionally stable and accurate to a few ulps on
//! the small matrices this crate works with.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for positive-semidefiniteness verdicts.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;

/// Real symmetric matrix. Construction forces `m[(i, j)] == m[(j, i)]` bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts a square finite matrix that is symmetric up to rounding
    /// (relative 1e-10) and stores its exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::input(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::input(format!(
                "matrix is not symmetric (max |m - m^T| = {asym:e})"
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Stores `(m + m^T) / 2` without checking how far `m` was from symmetric.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::input(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        SymMatrix(DMatrix::identity(n, n) * c)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    /// `t m t^T` for an arbitrary (possibly rectangular) `t`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrize(t * &self.0 * t.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }

    /// Row-major nested vectors, the layout used by the JSON schemas.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        sym_eigen(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigen()?.values[0])
    }

    /// Inverse through the eigendecomposition; singular input is a domain error.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let eig = self.eigen()?;
        let lo = eig.values.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if !(lo > f64::EPSILON * self.max_abs() * self.dim() as f64) {
            return Err(Error::domain(format!(
                "matrix is numerically singular (smallest |eigenvalue| {lo:e})"
            )));
        }
        let inv = eig.values.map(|x| 1.0 / x);
        Ok(SymMatrix::symmetrize(
            &eig.vectors * DMatrix::from_diagonal(&inv) * eig.vectors.transpose(),
        ))
    }
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::input(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::input(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Complex Hermitian matrix. Construction forces exact Hermitian symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(DMatrix<Complex<f64>>);

impl HermMatrix {
    pub fn new(m: DMatrix<Complex<f64>>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::input("Hermitian matrix must be square and non-empty"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        let scale = m.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        let dev = (&m - m.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        if dev > 1e-10 * scale {
            return Err(Error::input(format!(
                "matrix is not Hermitian (max |m - m^H| = {dev:e})"
            )));
        }
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            out[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                let z = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        Ok(HermMatrix(out))
    }

    /// `re + i * im` with `re` symmetric and `im` antisymmetric.
    pub fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::input("real and imaginary parts differ in shape"));
        }
        Self::new(DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
            Complex::new(re[(i, j)], im[(i, j)])
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex<f64>> {
        &self.0
    }

    /// Real symmetric embedding `[[Re, -Im], [Im, Re]]`; every eigenvalue of
    /// the Hermitian matrix appears there twice.
    pub fn real_embedding(&self) -> SymMatrix {
        let n = self.dim();
        let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = self.0[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        SymMatrix::symmetrize(m)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = sym_eigen(&self.real_embedding())?;
        Ok(eig.values.iter().step_by(2).copied().collect())
    }
}

/// Outcome of a tolerance-based positive-semidefiniteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdVerdict {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// Absolute tolerance actually applied to `min_eigenvalue`.
    pub tolerance_used: f64,
}

impl PsdVerdict {
    fn from_spectrum(values: &[f64], rel_tol: f64) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let radius = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let tol = rel_tol * radius.max(1.0);
        PsdVerdict {
            is_psd: min >= -tol,
            min_eigenvalue: min,
            tolerance_used: tol,
        }
    }
}

/// Spectral decomposition `m = Q diag(values) Q^T`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let total = a.norm();
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            if off <= f64::EPSILON * total {
                break;
            }
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
                matrix: m.as_matrix().clone(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Once the coupling no longer perturbs either diagonal entry it is dropped.
                let g = 100.0 * apq.abs();
                if sweeps > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

// Applies the Jacobi rotation J(p, q, c, s): a <- J^T a J, v <- v J.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// PSD verdict for a Hermitian matrix using absolute tolerance
/// `rel_tol * max(1, spectral radius)`.
pub fn herm_psd(m: &HermMatrix, rel_tol: f64) -> Result<PsdVerdict> {
    if !(rel_tol >= 0.0) {
        return Err(Error::input("tolerance must be non-negative"));
    }
    Ok(PsdVerdict::from_spectrum(&m.eigenvalues()?, rel_tol))
}

/// Same verdict rule as [`herm_psd`] for a real symmetric matrix.
pub fn sym_psd(m: &SymMatrix, rel_tol: f64) -> Result<PsdVerdict> {
    if !(rel_tol >= 0.0) {
        return Err(Error::input("tolerance must be non-negative"));
    }
    let eig = sym_eigen(m)?;
    Ok(PsdVerdict::from_spectrum(eig.values.as_slice(), rel_tol))
}

/// `Q f(Λ) Q^T`. A non-finite value of `f` at an eigenvalue is a domain error.
pub fn sym_func<F: Fn(f64) -> f64>(m: &SymMatrix, f: F) -> Result<SymMatrix> {
    let eig = sym_eigen(m)?;
    let mut fv = eig.values.clone();
    for (out, &lam) in fv.iter_mut().zip(eig.values.iter()) {
        let y = f(lam);
        if !y.is_finite() {
            return Err(Error::domain(format!(
                "matrix function undefined at eigenvalue {lam:e}"
            )));
        }
        *out = y;
    }
    Ok(SymMatrix::symmetrize(
        &eig.vectors * DMatrix::from_diagonal(&fv) * eig.vectors.transpose(),
    ))
}

/// `Tr f(m)` computed from the spectrum.
pub fn trace_func<F: Fn(f64) -> f64>(m: &SymMatrix, f: F) -> Result<f64> {
    let eig = sym_eigen(m)?;
    let mut sum = 0.0;
    for &lam in eig.values.iter() {
        let y = f(lam);
        if !y.is_finite() {
            return Err(Error::domain(format!(
                "matrix function undefined at eigenvalue {lam:e}"
            )));
        }
        sum += y;
    }
    Ok(sum)
}

fn require_positive_definite(m: &SymMatrix, what: &str) -> Result<SymEigen> {
    let eig = sym_eigen(m)?;
    let lo = eig.values[0];
    if !(lo > 0.0) {
        return Err(Error::domain(format!(
            "{what} is not positive definite (min eigenvalue {lo:e})"
        )));
    }
    Ok(eig)
}

/// `a^{-1/2} b a^{-1/2}` for positive-definite `a`.
pub fn sandwich(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "dimension mismatch in sandwich: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let eig = require_positive_definite(a, "sandwich base")?;
    let inv_sqrt = eig.values.map(|x| 1.0 / x.sqrt());
    let root = &eig.vectors * DMatrix::from_diagonal(&inv_sqrt) * eig.vectors.transpose();
    Ok(SymMatrix::symmetrize(&root * b.as_matrix() * &root))
}

/// `ln det m` as the sum of log-eigenvalues.
pub fn logdet(m: &SymMatrix) -> Result<f64> {
    let eig = require_positive_definite(m, "logdet argument")?;
    Ok(eig.values.iter().map(|x| x.ln()).sum())
}

/// Determinant as the product of eigenvalues (no definiteness requirement).
pub fn det(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eigen(m)?.values.iter().product())
}
