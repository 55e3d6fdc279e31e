//! Dense complex linear algebra: Hermitian eigenproblems, symmetric-definite
//! pencils, LU solves and norms.
//!
//! Storage is `nalgebra` column-major. Dimensions in this crate are small
//! (N <= 64 for far-field matrices) except for the forward volume solve, which
//! only goes through [`solve_dense`] / [`LuFactorization`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A square complex matrix equal to its conjugate transpose.
///
/// Every constructor symmetrizes, so the stored entries satisfy `A == A*`
/// bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Builds the self-adjoint part `(A + A*) / 2` of a square matrix.
    pub fn from_matrix(a: ComplexMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(&a)?;
        Ok(Self::symmetrized(a))
    }

    pub(crate) fn symmetrized(mut a: ComplexMatrix) -> Self {
        let n = a.nrows();
        for j in 0..n {
            a[(j, j)] = Complex64::new(a[(j, j)].re, 0.0);
            for i in (j + 1)..n {
                let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        Self { inner: a }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &HermitianMatrix) {
        debug_assert_eq!(self.dim(), other.dim());
        self.inner
            .iter_mut()
            .zip(other.inner.iter())
            .for_each(|(a, b)| *a += b * alpha);
    }

    /// `self + c * I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for j in 0..out.dim() {
            out.inner[(j, j)].re += c;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * Complex64::new(c, 0.0),
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.inner)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.inner[(j, j)].re).sum()
    }

    /// Real Frobenius inner product `Re trace(self * other)`; exact for Hermitian pairs.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        // trace(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// Eigenvalues only, sorted descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.inner.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }

    /// Largest eigenvalue magnitude, i.e. the spectral norm.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Self-adjoint part `(A + A*) / 2`.
pub fn self_adjoint_part(a: &ComplexMatrix) -> Result<HermitianMatrix> {
    HermitianMatrix::from_matrix(a.clone())
}

/// Hermitian "imaginary part" `(A - A*) / (2i)`.
pub fn skew_adjoint_part(a: &ComplexMatrix) -> Result<HermitianMatrix> {
    let scaled = a * (-I);
    HermitianMatrix::from_matrix(scaled)
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal columns, column `j` belongs to `values[j]`.
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    /// Rebuilds `V diag(f(lambda)) V*`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        let out = scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        HermitianMatrix::symmetrized(out)
    }
}

/// Full Hermitian eigendecomposition, eigenvalues descending.
pub fn eigh(a: &HermitianMatrix) -> Result<EigenSystem> {
    if a.dim() == 0 {
        return Err(Error::Input("eigh of an empty matrix".into()));
    }
    ensure_finite(a.matrix())?;
    let eig = a.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.dim(), a.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenSystem { values, vectors })
}

/// Number of eigenvalues below `-tol`.
pub fn count_negative(values: &[f64], tol: f64) -> usize {
    values.iter().filter(|&&v| v < -tol).count()
}

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `B`-orthonormal columns: `X* B X = I`.
    pub vectors: ComplexMatrix,
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(b: &HermitianMatrix) -> Result<ComplexMatrix> {
    let n = b.dim();
    let a = b.matrix();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `A x = mu B x` for Hermitian `A` and Hermitian positive definite `B`
/// by congruence with the Cholesky factor of `B`.
pub fn geneig_definite(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<GeneralizedEigen> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "pencil dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    ensure_finite(a.matrix())?;
    let l = cholesky(b)?;
    let y = l
        .solve_lower_triangular(a.matrix())
        .ok_or(Error::NotPositiveDefinite { pivot: 0.0 })?;
    let c = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or(Error::NotPositiveDefinite { pivot: 0.0 })?;
    let reduced = eigh(&HermitianMatrix::symmetrized(c))?;
    // eigh is descending; reverse to ascending.
    let n = a.dim();
    let values: Vec<f64> = reduced.values.iter().rev().copied().collect();
    let w = DMatrix::from_fn(n, n, |r, c| reduced.vectors[(r, n - 1 - c)]);
    let vectors = l
        .adjoint()
        .solve_upper_triangular(&w)
        .ok_or(Error::NotPositiveDefinite { pivot: 0.0 })?;
    Ok(GeneralizedEigen { values, vectors })
}

/// LU factorization with partial pivoting, reusable for several right-hand sides.
///
/// Backed by `faer`'s blocked kernel; the volume solve is the only large dense
/// system in the crate.
pub struct LuFactorization {
    lu: faer::linalg::solvers::PartialPivLu<Complex64>,
    n: usize,
}

impl LuFactorization {
    /// Relative pivot threshold below which the matrix is reported singular.
    const PIVOT_TOL: f64 = 1e-14;

    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "solve needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(&a)?;
        let n = a.nrows();
        let scale = a.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let lu = faer::MatRef::from_column_major_slice(a.as_slice(), n, n).partial_piv_lu();
        let u = lu.U();
        let min_pivot = (0..n).fold(f64::INFINITY, |m, j| m.min(u[(j, j)].norm()));
        if n > 0 && !(min_pivot > Self::PIVOT_TOL * scale) {
            return Err(Error::Singular { pivot: min_pivot });
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        use faer::linalg::solvers::Solve;
        if b.nrows() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, matrix has {}",
                b.nrows(),
                self.n
            )));
        }
        let rhs = faer::MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols());
        let x = self.lu.solve(rhs);
        Ok(DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| x[(i, j)]))
    }
}

/// Solves `A x = b` with partial-pivoting LU.
pub fn solve_dense(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    let lu = LuFactorization::new(a.clone())?;
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = lu.solve(&rhs)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// Solves `A x = b` for a real symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    use faer::linalg::solvers::Solve;
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "system is {}x{}, right-hand side has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
        return Err(Error::Input("system has non-finite entries".into()));
    }
    let llt = faer::MatRef::from_column_major_slice(a.as_slice(), n, n)
        .llt(faer::Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite { pivot: f64::NAN })?;
    let rhs = faer::MatRef::from_column_major_slice(b.as_slice(), n, 1);
    let x = llt.solve(rhs);
    Ok(DVector::from_fn(n, |i, _| x[(i, 0)]))
}

/// Largest singular value.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.singular_values().iter().fold(0.0_f64, |m, &s| m.max(s)))
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn ensure_finite(a: &ComplexMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input("matrix has non-finite entries".into()))
    }
}
