//! Born (linearized) far-field matrices of pixel indicators.
//!
//! For a pixel `P_m` with center `z_m` and side `ell`,
//!
//! ```text
//! S_m(l, j) = (2 pi / N) k^2 ∫_{P_m} exp(i k y·(θ_j − θ_l)) dy
//!           = (2 pi / N) (k ell)^2 exp(i k z_m·d) sinc(k ell d_1 / 2) sinc(k ell d_2 / 2),
//! ```
//!
//! with `d = θ_j − θ_l`. Every `S_m` is Hermitian positive definite.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ContrastField, DirectionSet, PixelGrid, Point};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::special::sinc;

/// Seed for choosing which stack members get a definiteness check.
const SAMPLE_SEED: u64 = 0x5eed_0f_5a;

fn phase(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// Position-independent factor `(2 pi / N)(k ell)^2 sinc·sinc` of every pixel matrix.
fn envelope(k: f64, ell: f64, dirs: &DirectionSet) -> ComplexMatrix {
    let n = dirs.len();
    let units = dirs.units();
    let scale = 2.0 * PI / n as f64 * (k * ell).powi(2);
    DMatrix::from_fn(n, n, |l, j| {
        let d = [units[j][0] - units[l][0], units[j][1] - units[l][1]];
        Complex64::new(scale * sinc(0.5 * k * ell * d[0]) * sinc(0.5 * k * ell * d[1]), 0.0)
    })
}

fn modulate(env: &ComplexMatrix, k: f64, z: Point, units: &[Point]) -> HermitianMatrix {
    let p: Vec<Complex64> = units.iter().map(|t| phase(k * (z[0] * t[0] + z[1] * t[1]))).collect();
    let n = units.len();
    HermitianMatrix::symmetrized(DMatrix::from_fn(n, n, |l, j| env[(l, j)] * p[j] * p[l].conj()))
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Input(format!("wavenumber must be positive, got {k}")));
    }
    Ok(())
}

/// Born far-field matrix of the indicator of pixel `m`.
pub fn sensitivity_matrix(k: f64, grid: &PixelGrid, m: usize, dirs: &DirectionSet) -> Result<HermitianMatrix> {
    check_k(k)?;
    if m >= grid.len() {
        return Err(Error::Input(format!("pixel index {m} out of range for {} pixels", grid.len())));
    }
    let env = envelope(k, grid.ell(), dirs);
    Ok(modulate(&env, k, grid.center(m), &dirs.units()))
}

/// The sensitivity matrices of all pixels of a grid.
#[derive(Debug, Clone)]
pub struct SensitivityStack {
    pub k: f64,
    pub grid: PixelGrid,
    pub dirs: DirectionSet,
    matrices: Vec<HermitianMatrix>,
}

impl SensitivityStack {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n(&self) -> usize {
        self.dirs.len()
    }

    pub fn get(&self, m: usize) -> &HermitianMatrix {
        &self.matrices[m]
    }

    pub fn matrices(&self) -> &[HermitianMatrix] {
        &self.matrices
    }

    /// Minimum eigenvalue of every member, in pixel order.
    pub fn min_eigenvalues(&self) -> Vec<f64> {
        self.matrices
            .par_iter()
            .map(|s| s.eigenvalues().last().copied().unwrap_or(f64::INFINITY))
            .collect()
    }

    /// Rejects members with an eigenvalue below `-N eps ||S||_2`.
    ///
    /// The smallest eigenvalues of `S_m` fall far below roundoff once `N`
    /// grows past about a dozen directions, so a computed eigenvalue of
    /// either sign within the roundoff band is consistent with definiteness.
    fn check_definite(&self, members: impl IntoIterator<Item = usize>) -> Result<()> {
        for m in members {
            let ev = self.matrices[m].eigenvalues();
            let (hi, lo) = (ev.first().copied().unwrap_or(0.0), ev.last().copied().unwrap_or(0.0));
            if !(hi > 0.0) || !(lo > -(self.n() as f64) * f64::EPSILON * hi) {
                return Err(Error::Invariant(format!(
                    "sensitivity matrix of pixel {m} has eigenvalue {lo:e} (largest {hi:e})"
                )));
            }
        }
        Ok(())
    }

    fn check_grid(&self, grid: &PixelGrid) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::Dimension(format!(
                "contrast lives on a {0}x{0} grid of half-width {1}, stack on {2}x{2} of half-width {3}",
                grid.side, grid.half_width, self.grid.side, self.grid.half_width
            )));
        }
        Ok(())
    }

    fn check_coefficients(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} pixels",
                a.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `Σ a_m S_m`.
    pub fn combine(&self, a: &[f64]) -> Result<HermitianMatrix> {
        self.check_coefficients(a)?;
        let mut out = HermitianMatrix::zeros(self.n());
        for (s, &am) in self.matrices.iter().zip(a) {
            if am != 0.0 {
                out.axpy(am, s);
            }
        }
        Ok(out)
    }

    /// `Re tr(A S_m)` for every pixel, in pixel order.
    pub fn traces_against(&self, a: &HermitianMatrix) -> Result<Vec<f64>> {
        if a.dim() != self.n() {
            return Err(Error::Dimension(format!(
                "{}x{0} matrix against {}x{1} sensitivities",
                a.dim(),
                self.n()
            )));
        }
        Ok(self.matrices.par_iter().map(|s| s.trace_product(a)).collect())
    }
}

/// Assembles all `M` sensitivity matrices and checks definiteness on a 1% sample.
pub fn sensitivity_stack(k: f64, grid: &PixelGrid, dirs: &DirectionSet) -> Result<SensitivityStack> {
    check_k(k)?;
    let env = envelope(k, grid.ell(), dirs);
    let units = dirs.units();
    let matrices: Vec<HermitianMatrix> = (0..grid.len())
        .into_par_iter()
        .map(|m| modulate(&env, k, grid.center(m), &units))
        .collect();
    let stack = SensitivityStack {
        k,
        grid: *grid,
        dirs: dirs.clone(),
        matrices,
    };
    let m = stack.len();
    if m > 0 {
        let count = m.div_ceil(100);
        let mut rng = ChaCha20Rng::seed_from_u64(SAMPLE_SEED);
        stack.check_definite(sample(&mut rng, m, count).into_iter())?;
    }
    Ok(stack)
}

/// Checks every member of the stack for positive definiteness.
pub fn check_all_definite(stack: &SensitivityStack) -> Result<()> {
    stack.check_definite(0..stack.len())
}

/// Born far-field matrix `Σ h_m S_m` of a contrast on the stack's grid.
pub fn born_far_field(stack: &SensitivityStack, h: &ContrastField) -> Result<HermitianMatrix> {
    stack.check_grid(&h.grid)?;
    stack.combine(&h.values)
}

/// `V − Σ h_m S_m`.
pub fn linearized_residual(v: &HermitianMatrix, stack: &SensitivityStack, h: &[f64]) -> Result<HermitianMatrix> {
    if v.dim() != stack.n() {
        return Err(Error::Dimension(format!(
            "data matrix is {0}x{0}, sensitivities are {1}x{1}",
            v.dim(),
            stack.n()
        )));
    }
    Ok(v.sub(&stack.combine(h)?))
}

/// Born far field of a contrast on any grid without materializing the stack.
///
/// Only pixels with nonzero contrast contribute, so this is cheap on fine
/// forward grids.
pub fn born_far_field_sparse(k: f64, h: &ContrastField, dirs: &DirectionSet) -> Result<HermitianMatrix> {
    check_k(k)?;
    let env = envelope(k, h.grid.ell(), dirs);
    let units = dirs.units();
    let n = dirs.len();
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for m in 0..h.grid.len() {
        let q = h.values[m];
        if q == 0.0 {
            continue;
        }
        let z = h.grid.center(m);
        let p: Vec<Complex64> = units.iter().map(|t| phase(k * (z[0] * t[0] + z[1] * t[1]))).collect();
        for j in 0..n {
            for l in 0..n {
                acc[(l, j)] += p[j] * p[l].conj() * q;
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(acc.component_mul(&env)))
}

/// One-dimensional product-rule nodes and weights on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (t * p1 - p0) / (t * t - 1.0))
}

impl QuadratureRule {
    pub fn midpoint(q: usize) -> Self {
        Self {
            nodes: (0..q).map(|i| (i as f64 + 0.5) / q as f64).collect(),
            weights: vec![1.0 / q as f64; q],
        }
    }

    /// Gauss–Legendre nodes by Newton iteration on `P_q`.
    pub fn gauss_legendre(q: usize) -> Self {
        let (nodes, weights) = (0..q)
            .map(|i| {
                let mut t = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre(q, t);
                    t -= p / dp;
                    if (p / dp).abs() < 1e-16 {
                        break;
                    }
                }
                let (_, dp) = legendre(q, t);
                (0.5 * (t + 1.0), 1.0 / ((1.0 - t * t) * dp * dp))
            })
            .unzip();
        Self { nodes, weights }
    }
}

/// `(2 pi / N) k^2 ∫_{P_m} exp(i k y·(theta_j - theta_l)) dy` by a tensor rule.
pub fn sensitivity_quadrature(
    k: f64,
    grid: &PixelGrid,
    m: usize,
    dirs: &DirectionSet,
    rule: &QuadratureRule,
) -> Result<ComplexMatrix> {
    check_k(k)?;
    if m >= grid.len() {
        return Err(Error::Input(format!("pixel {m} outside a grid of {}", grid.len())));
    }
    let n = dirs.len();
    let z = grid.center(m);
    let ell = grid.ell();
    let units = dirs.units();
    let pairs: Vec<(f64, f64)> = rule.nodes.iter().copied().zip(rule.weights.iter().copied()).collect();
    Ok(DMatrix::from_fn(n, n, |l, j| {
        let d = [units[j][0] - units[l][0], units[j][1] - units[l][1]];
        let mut s = Complex64::new(0.0, 0.0);
        for &(ta, wa) in &pairs {
            for &(tb, wb) in &pairs {
                let y = [z[0] + (ta - 0.5) * ell, z[1] + (tb - 0.5) * ell];
                s += phase(k * (y[0] * d[0] + y[1] * d[1])) * (wa * wb);
            }
        }
        s * (ell * ell) * (2.0 * PI / n as f64 * k * k)
    }))
}
