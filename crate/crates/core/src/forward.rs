//! Far-field simulation for penetrable scatterers.
//!
//! Total fields solve the Lippmann–Schwinger equation
//! `u = u_i + k^2 G(q u)` by midpoint collocation on the cells of a pixel
//! grid that carry positive contrast. The self-cell weight integrates the
//! Green's function over the equal-area disk in closed form. The
//! separation-of-variables solution for a homogeneous disk serves as an
//! independent check of the volume solver.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ContrastField, DirectionSet, PixelGrid, Point};
use crate::linalg::{self, ComplexMatrix, HermitianMatrix, LuFactorization};
use crate::special::{bessel_j_orders, bessel_y_orders, hankel01};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Generator used for noise matrices, recorded in artifact metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha, seed_from_u64)";

/// Direction-sampled far field, `entry(l, m) = (2 pi / N) u_inf(x_l; theta_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMatrix {
    pub k: f64,
    pub dirs: DirectionSet,
    pub data: ComplexMatrix,
}

impl FarFieldMatrix {
    pub fn new(k: f64, dirs: DirectionSet, data: ComplexMatrix) -> Result<Self> {
        if data.nrows() != dirs.len() || data.ncols() != dirs.len() {
            return Err(Error::Dimension(format!(
                "far-field matrix is {}x{} but there are {} directions",
                data.nrows(),
                data.ncols(),
                dirs.len()
            )));
        }
        linalg::ensure_finite(&data)?;
        Ok(Self { k, dirs, data })
    }

    pub fn n(&self) -> usize {
        self.dirs.len()
    }

    /// `(F + F*) / 2`.
    pub fn self_adjoint_part(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.data.clone())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            dirs: self.dirs.clone(),
            data: &self.data * Complex64::new(c, 0.0),
        }
    }

    /// `max |F(l,m) - F(m+N/2, l+N/2)| / max |F|`.
    pub fn reciprocity_defect(&self) -> f64 {
        let n = self.n();
        let scale = self.data.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let mut worst = 0.0_f64;
        for l in 0..n {
            for m in 0..n {
                let other = self.data[(self.dirs.opposite(m), self.dirs.opposite(l))];
                worst = worst.max((self.data[(l, m)] - other).norm());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// `||F F* - F* F||_F / ||F||_F^2`.
    pub fn normality_defect(&self) -> f64 {
        let f = &self.data;
        let fa = f.adjoint();
        let c = f * &fa - &fa * f;
        let nf = linalg::frobenius_norm(f);
        if nf > 0.0 {
            linalg::frobenius_norm(&c) / (nf * nf)
        } else {
            0.0
        }
    }
}

/// `\int_P Phi_k(z, y) dy` over a square cell of side `ell` centered at `z`,
/// approximated by the disk of equal area.
pub fn self_cell_integral(k: f64, ell: f64) -> Complex64 {
    let rho = ell / PI.sqrt();
    let (_, h1) = hankel01(k * rho);
    I * (PI * rho / (2.0 * k)) * h1 - Complex64::new(1.0 / (k * k), 0.0)
}

/// Lippmann–Schwinger solution restricted to the cells with positive contrast.
#[derive(Debug, Clone)]
pub struct ForwardField {
    pub k: f64,
    pub grid: PixelGrid,
    pub dirs: DirectionSet,
    /// Grid indices of the unknowns.
    pub cells: Vec<usize>,
    pub positions: Vec<Point>,
    pub contrast: Vec<f64>,
    /// `cells.len() x N`; column `m` is the total field for incidence `theta_m`.
    pub fields: ComplexMatrix,
    /// `||A U - U_i||_F / ||U_i||_F` of the collocation system.
    pub residual: f64,
}

impl ForwardField {
    pub fn far_field(&self) -> Result<FarFieldMatrix> {
        let n = self.dirs.len();
        let w = self.grid.pixel_area();
        let units = self.dirs.units();
        let scale = 2.0 * PI / n as f64 * self.k * self.k * w;
        let mut data = DMatrix::<Complex64>::zeros(n, n);
        for l in 0..n {
            let x = units[l];
            let weights: Vec<Complex64> = self
                .positions
                .iter()
                .zip(&self.contrast)
                .map(|(z, &q)| phase(-self.k * (x[0] * z[0] + x[1] * z[1])) * q)
                .collect();
            for m in 0..n {
                let col = self.fields.column(m);
                let s: Complex64 = weights.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                data[(l, m)] = s * scale;
            }
        }
        FarFieldMatrix::new(self.k, self.dirs.clone(), data)
    }

    /// Total field at an arbitrary point for incidence `theta_m`, from the
    /// volume representation. Points at a cell center use the collocated value.
    pub fn total_field_at(&self, p: Point, m: usize) -> Result<Complex64> {
        let theta = self.dirs.unit(m);
        let ui = phase(self.k * (p[0] * theta[0] + p[1] * theta[1]));
        let w = self.grid.pixel_area();
        let ell = self.grid.ell();
        let mut s = Complex64::new(0.0, 0.0);
        for (j, (z, &q)) in self.positions.iter().zip(&self.contrast).enumerate() {
            let r = (p[0] - z[0]).hypot(p[1] - z[1]);
            if r < 1e-9 * ell {
                return Ok(self.fields[(j, m)]);
            }
            let weight = green(self.k, r) * w;
            s += weight * q * self.fields[(j, m)];
        }
        Ok(ui + s * (self.k * self.k))
    }
}

#[inline]
fn phase(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

#[inline]
fn green(k: f64, r: f64) -> Complex64 {
    let (h0, _) = hankel01(k * r);
    Complex64::new(0.0, 0.25) * h0
}

fn check_wavenumber(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Input(format!("wavenumber must be positive, got {k}")));
    }
    Ok(())
}

/// Solves the collocated Lippmann–Schwinger system for every incident direction.
pub fn solve_total_fields(k: f64, contrast: &ContrastField, dirs: &DirectionSet) -> Result<ForwardField> {
    check_wavenumber(k)?;
    let grid = contrast.grid;
    let cells = contrast.support();
    let positions: Vec<Point> = cells.iter().map(|&m| grid.center(m)).collect();
    let q: Vec<f64> = cells.iter().map(|&m| contrast.values[m]).collect();
    let n = cells.len();
    let ndir = dirs.len();
    let units = dirs.units();

    let incident = DMatrix::from_fn(n, ndir, |j, m| {
        let z = positions[j];
        phase(k * (z[0] * units[m][0] + z[1] * units[m][1]))
    });
    if n == 0 {
        return Ok(ForwardField {
            k,
            grid,
            dirs: dirs.clone(),
            cells,
            positions,
            contrast: q,
            fields: incident,
            residual: 0.0,
        });
    }

    let w = grid.pixel_area();
    let k2 = k * k;
    let self_term = self_cell_integral(k, grid.ell());
    // Column-major: column j holds -k^2 G(z_i, z_j) q_j (+ identity).
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let zj = positions[j];
        for (i, out) in col.iter_mut().enumerate() {
            let g = if i == j {
                self_term
            } else {
                let zi = positions[i];
                green(k, (zi[0] - zj[0]).hypot(zi[1] - zj[1])) * w
            };
            *out = -g * (k2 * q[j]);
            if i == j {
                *out += 1.0;
            }
        }
    });
    let system = DMatrix::from_vec(n, n, entries);
    let lu = LuFactorization::new(system.clone()).map_err(|e| Error::Solver(e.to_string()))?;
    let fields = lu.solve(&incident)?;
    let residual = linalg::frobenius_norm(&(&system * &fields - &incident)) / linalg::frobenius_norm(&incident);
    if !(residual <= 1e-10) {
        return Err(Error::Solver(format!(
            "Lippmann–Schwinger residual {residual:e} exceeds 1e-10"
        )));
    }
    Ok(ForwardField {
        k,
        grid,
        dirs: dirs.clone(),
        cells,
        positions,
        contrast: q,
        fields,
        residual,
    })
}

/// Simulated far-field matrix of a rasterized contrast.
pub fn far_field_matrix(k: f64, contrast: &ContrastField, dirs: &DirectionSet) -> Result<FarFieldMatrix> {
    solve_total_fields(k, contrast, dirs)?.far_field()
}

/// Derivative at zero contrast of the discrete map `q -> far_field_matrix(k, q, dirs)`:
/// the same collocation with the incident field in place of the total field.
pub fn linearized_far_field(k: f64, contrast: &ContrastField, dirs: &DirectionSet) -> Result<FarFieldMatrix> {
    check_wavenumber(k)?;
    let grid = contrast.grid;
    let cells = contrast.support();
    let positions: Vec<Point> = cells.iter().map(|&m| grid.center(m)).collect();
    let units = dirs.units();
    let fields = DMatrix::from_fn(cells.len(), dirs.len(), |j, m| {
        let z = positions[j];
        phase(k * (z[0] * units[m][0] + z[1] * units[m][1]))
    });
    ForwardField {
        k,
        grid,
        dirs: dirs.clone(),
        contrast: cells.iter().map(|&m| contrast.values[m]).collect(),
        cells,
        positions,
        fields,
        residual: 0.0,
    }
    .far_field()
}

/// Scattering coefficients of a homogeneous disk: exterior `b_n`, interior `c_n`.
#[derive(Debug, Clone)]
pub struct MieCoefficients {
    pub k: f64,
    pub interior_k: f64,
    pub radius: f64,
    pub exterior: Vec<Complex64>,
    pub interior: Vec<Complex64>,
}

const MIE_MAX_TERMS: usize = 200;
const MIE_TOL: f64 = 1e-14;

impl MieCoefficients {
    /// Coefficients for orders `n >= 0`; `b_{-n} = b_n`.
    pub fn new(k: f64, q: f64, radius: f64) -> Result<Self> {
        check_wavenumber(k)?;
        if !(q > 0.0) || !(radius > 0.0) {
            return Err(Error::Input(format!(
                "disk needs q > 0 and radius > 0, got q = {q}, radius = {radius}"
            )));
        }
        let k1 = k * (1.0 + q).sqrt();
        let (x, x1) = (k * radius, k1 * radius);
        let top = MIE_MAX_TERMS + 1;
        let j = bessel_j_orders(top, x);
        let j1 = bessel_j_orders(top, x1);
        let y = bessel_y_orders(top, x)?;
        let h: Vec<Complex64> = j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let deriv = |f: &[f64], n: usize, arg: f64| {
            if n == 0 {
                -f[1]
            } else {
                f[n - 1] - n as f64 / arg * f[n]
            }
        };
        let mut exterior = Vec::new();
        let mut interior = Vec::new();
        let mut small = 0;
        for n in 0..MIE_MAX_TERMS {
            let hp = if n == 0 { -h[1] } else { h[n - 1] - h[n] * (n as f64 / x) };
            let (jn, jpn) = (j[n], deriv(&j, n, x));
            let (j1n, j1pn) = (j1[n], deriv(&j1, n, x1));
            let denom = hp * (k * j1n) - h[n] * (k1 * j1pn);
            let b = (k1 * j1pn * jn - k * j1n * jpn) / denom;
            let c = Complex64::new(0.0, 2.0 * k / (PI * x)) / denom;
            if !(b.re.is_finite() && b.im.is_finite() && c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Convergence(format!("disk series overflowed at order {n}")));
            }
            exterior.push(b);
            interior.push(c);
            if b.norm() < MIE_TOL && (c * j1n).norm() < MIE_TOL {
                small += 1;
                if small == 2 {
                    return Ok(Self {
                        k,
                        interior_k: k1,
                        radius,
                        exterior,
                        interior,
                    });
                }
            } else {
                small = 0;
            }
        }
        Err(Error::Convergence(format!(
            "disk series needs more than {MIE_MAX_TERMS} terms"
        )))
    }

    /// Centered far field `u_inf` at angle difference `delta = phi_obs - phi_inc`.
    pub fn far_field(&self, delta: f64) -> Complex64 {
        let mut s = self.exterior[0];
        for (n, b) in self.exterior.iter().enumerate().skip(1) {
            s += b * (2.0 * (n as f64 * delta).cos());
        }
        s * Complex64::new(0.0, -4.0)
    }

    /// Total field at offset `p` from the disk center for incidence angle `phi_inc`.
    pub fn total_field(&self, p: Point, phi_inc: f64) -> Result<Complex64> {
        let r = p[0].hypot(p[1]);
        let delta = p[1].atan2(p[0]) - phi_inc;
        let nmax = self.exterior.len() - 1;
        let mut i_pow = Complex64::new(1.0, 0.0);
        let mut s = Complex64::new(0.0, 0.0);
        if r <= self.radius {
            let jv = bessel_j_orders(nmax, self.interior_k * r);
            for n in 0..=nmax {
                let mult = if n == 0 { 1.0 } else { 2.0 * (n as f64 * delta).cos() };
                s += i_pow * self.interior[n] * jv[n] * mult;
                i_pow *= I;
            }
            Ok(s)
        } else {
            let x = self.k * r;
            let jv = bessel_j_orders(nmax, x);
            let yv = bessel_y_orders(nmax, x)?;
            for n in 0..=nmax {
                let mult = if n == 0 { 1.0 } else { 2.0 * (n as f64 * delta).cos() };
                s += i_pow * self.exterior[n] * Complex64::new(jv[n], yv[n]) * mult;
                i_pow *= I;
            }
            let incident = phase(self.k * r * delta.cos());
            Ok(incident + s)
        }
    }
}

/// Separation-of-variables far-field matrix of a homogeneous disk.
pub fn disk_mie_far_field(
    k: f64,
    q: f64,
    radius: f64,
    center: Point,
    dirs: &DirectionSet,
) -> Result<FarFieldMatrix> {
    let coeffs = MieCoefficients::new(k, q, radius)?;
    let n = dirs.len();
    let units = dirs.units();
    let scale = 2.0 * PI / n as f64;
    let data = DMatrix::from_fn(n, n, |l, m| {
        let shift = (units[m][0] - units[l][0]) * center[0] + (units[m][1] - units[l][1]) * center[1];
        coeffs.far_field(dirs.angle(l) - dirs.angle(m)) * phase(k * shift) * scale
    });
    FarFieldMatrix::new(k, dirs.clone(), data)
}

/// Total field of a disk at an absolute point, for incidence direction `theta_m`.
pub fn disk_mie_total_field(
    coeffs: &MieCoefficients,
    center: Point,
    dirs: &DirectionSet,
    m: usize,
    p: Point,
) -> Result<Complex64> {
    let theta = dirs.unit(m);
    let shift = phase(coeffs.k * (center[0] * theta[0] + center[1] * theta[1]));
    Ok(coeffs.total_field([p[0] - center[0], p[1] - center[1]], dirs.angle(m))? * shift)
}

/// Noise level and generator seed for additive far-field noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub delta: f64,
    pub seed: u64,
}

/// `E / ||E||_2` with real and imaginary parts i.i.d. uniform on `[-1, 1]`.
///
/// Entries are drawn in row-major order, real part first.
pub fn noise_direction(n: usize, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut e = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        for m in 0..n {
            let re = rng.gen_range(-1.0..=1.0);
            let im = rng.gen_range(-1.0..=1.0);
            e[(l, m)] = Complex64::new(re, im);
        }
    }
    let norm = linalg::spectral_norm(&e)?;
    Ok(e / Complex64::new(norm, 0.0))
}

/// `F + delta E / ||E||_2`.
pub fn add_noise(f: &FarFieldMatrix, noise: NoiseModel) -> Result<FarFieldMatrix> {
    if !(noise.delta >= 0.0) || !noise.delta.is_finite() {
        return Err(Error::Input(format!("noise level must be >= 0, got {}", noise.delta)));
    }
    if noise.delta == 0.0 {
        return Ok(f.clone());
    }
    let e = noise_direction(f.n(), noise.seed)?;
    let data = &f.data + e * Complex64::new(noise.delta, 0.0);
    FarFieldMatrix::new(f.k, f.dirs.clone(), data)
}
