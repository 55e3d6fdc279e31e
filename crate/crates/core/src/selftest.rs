//! Small-scale oracle suite run by the `selftest` subcommand.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::born::{linearized_residual, sensitivity_quadrature, sensitivity_stack, QuadratureRule, SensitivityStack};
use crate::error::Result;
use crate::forward::{disk_mie_far_field, far_field_matrix};
use crate::geometry::{directions, rasterize, DirectionSet, PixelGrid, ShapeSpec};
use crate::linalg::HermitianMatrix;
use crate::monotonicity::{beta_star, beta_star_bisection_oracle};
use crate::reconstruct::{objective_subgradient, spectral_objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed error.
    pub error: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance
        )
    }
}

fn outcome(name: &str, error: f64, tolerance: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: error <= tolerance,
        error,
        tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
    pub seconds: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Worst relative Frobenius gap between `candidate(m)` and Gauss–Legendre quadrature.
pub fn sensitivity_check(
    k: f64,
    grid: &PixelGrid,
    dirs: &DirectionSet,
    pixels: &[usize],
    candidate: impl Fn(usize) -> Result<HermitianMatrix>,
) -> Result<CheckOutcome> {
    let rule = QuadratureRule::gauss_legendre(16);
    let mut worst = 0.0_f64;
    for &m in pixels {
        let q = sensitivity_quadrature(k, grid, m, dirs, &rule)?;
        worst = worst.max(rel(candidate(m)?.matrix(), &q));
    }
    Ok(outcome(&format!("sensitivity vs quadrature (k = {k})"), worst, 1e-10))
}

fn random_hermitian(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> HermitianMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    });
    HermitianMatrix::from_matrix(a).expect("finite entries")
}

fn beta_check(stack: &SensitivityStack, rng: &mut ChaCha20Rng) -> Result<CheckOutcome> {
    let n = stack.n();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let s = stack.get(rng.gen_range(0..stack.len()));
        let scale = rng.gen_range(0.001..0.05);
        let v = random_hermitian(rng, n, scale);
        let delta = rng.gen_range(0.0..0.05);
        let d = rng.gen_range(0..n);
        let fast = beta_star(&v, s, d, delta, 1.0)?;
        let slow = beta_star_bisection_oracle(&v, s, d, delta, 1.0)?;
        worst = worst.max((fast - slow).abs());
    }
    Ok(outcome("beta* vs bisection", worst, 1e-8))
}

fn mie_check() -> Result<CheckOutcome> {
    let dirs = directions(8)?;
    let grid = PixelGrid::new(5.0, 128)?;
    let k = 0.5;
    let disk = ShapeSpec::disk([0.3, -0.2], 1.0, 1.0);
    let q = rasterize(&[disk.clone()], &grid, 8)?;
    let f = far_field_matrix(k, &q, &dirs)?;
    let mie = disk_mie_far_field(k, 1.0, 1.0, disk.center, &dirs)?;
    Ok(outcome("solver vs Mie series", rel(&f.data, &mie.data), 1e-2))
}

fn subgradient_check(stack: &SensitivityStack, rng: &mut ChaCha20Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 10 {
        let v = random_hermitian(rng, stack.n(), 0.05);
        let a: Vec<f64> = (0..stack.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = linearized_residual(&v, stack, &a)?;
        let gap = r.eigenvalues().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        if gap < 1e-3 * r.spectral_radius() {
            continue;
        }
        let alpha = rng.gen_range(0.0..1.0);
        let d: Vec<f64> = (0..stack.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |t: f64| -> Result<f64> {
            let x: Vec<f64> = a.iter().zip(&d).map(|(a, d)| a + t * d).collect();
            Ok(spectral_objective(&linearized_residual(&v, stack, &x)?, alpha))
        };
        let h = 1e-6;
        let fd = (f(h)? - f(-h)?) / (2.0 * h);
        let g = objective_subgradient(&v, stack, &a, alpha)?;
        let dot: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
        worst = worst.max((fd - dot).abs() / dot.abs().max(1e-300));
        done += 1;
    }
    Ok(outcome("subgradient vs finite differences", worst, 1e-4))
}

/// Runs every oracle; failures are reported, not returned as errors.
pub fn selftest() -> Result<SelftestReport> {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5e1f);
    let grid = PixelGrid::new(5.0, 16)?;
    let dirs = directions(8)?;
    let mut checks = Vec::new();
    for k in [0.5, 1.0] {
        let stack = sensitivity_stack(k, &grid, &dirs)?;
        let pixels: Vec<usize> = (0..16).map(|_| rng.gen_range(0..grid.len())).collect();
        checks.push(sensitivity_check(k, &grid, &dirs, &pixels, |m| Ok(stack.get(m).clone()))?);
    }
    let stack = sensitivity_stack(1.0, &PixelGrid::new(5.0, 6)?, &dirs)?;
    checks.push(beta_check(&stack, &mut rng)?);
    checks.push(mie_check()?);
    checks.push(subgradient_check(&stack, &mut rng)?);
    Ok(SelftestReport {
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}
