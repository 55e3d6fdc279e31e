//! Monotonicity tests per pixel: defect counts and the box bounds they induce.
//!
//! For data `V`, shift `delta` and a pixel matrix `S`, the inertia function
//! `n(beta) = #{negative eigenvalues of V + delta I - beta S}` is non-decreasing
//! in `beta` because `S` is positive definite. Its jump points are the
//! generalized eigenvalues of the pencil `(V + delta I, S)`. The bound
//! `beta*(d)` is the largest `beta` with `n(beta) <= d`.
//!
//! `S` is numerically rank deficient once `N` exceeds a handful of directions
//! (its smallest eigenvalues fall far below roundoff), so the pencil is never
//! reduced through a factorization of `S`. Instead the jump point is found as
//! the root of the monotone eigenvalue curve
//! `beta -> lambda_{N-d}(V + delta I - beta S)`, whose slope is `-x* S x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born::SensitivityStack;
use crate::error::{Error, Result};
use crate::linalg::{count_negative, eigh, HermitianMatrix};

/// Eigenvalues within `ZERO_TOL * scale` of zero count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Which defect count feeds the bound of each pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DefectRule {
    /// Negative eigenvalues of `V + delta I` (the inertia at `beta = 0`).
    #[default]
    Background,
    /// Negative eigenvalues of `V - q_min S_m + delta I`.
    ContrastFloor,
}

fn check_pair(v: &HermitianMatrix, s: &HermitianMatrix) -> Result<()> {
    if v.dim() != s.dim() {
        return Err(Error::Dimension(format!(
            "data is {0}x{0}, sensitivity is {1}x{1}",
            v.dim(),
            s.dim()
        )));
    }
    Ok(())
}

fn check_params(q_min: f64, delta: f64) -> Result<()> {
    if !(q_min > 0.0) || !q_min.is_finite() {
        return Err(Error::Input(format!("q_min must be positive, got {q_min}")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Input(format!("noise level must be non-negative, got {delta}")));
    }
    Ok(())
}

/// `||V||_2 + q_min ||S||_2`, the scale of the matrices in a monotonicity test.
pub fn test_scale(v: &HermitianMatrix, s: &HermitianMatrix, q_min: f64) -> f64 {
    v.spectral_radius() + q_min * s.spectral_radius()
}

/// `V + delta I - beta S`.
fn pencil_at(v: &HermitianMatrix, s: &HermitianMatrix, delta: f64, beta: f64) -> HermitianMatrix {
    let mut a = v.shifted(delta);
    a.axpy(-beta, s);
    a
}

/// Negative eigenvalues of `V + delta I - beta S`, ignoring those within the zero tolerance.
pub fn inertia_count(v: &HermitianMatrix, s: &HermitianMatrix, delta: f64, beta: f64, tol: f64) -> usize {
    count_negative(&pencil_at(v, s, delta, beta).eigenvalues(), tol)
}

/// Strictly negative eigenvalues of `V - q_min S + delta I`.
pub fn defect_count(v: &HermitianMatrix, s: &HermitianMatrix, q_min: f64, delta: f64) -> Result<usize> {
    check_pair(v, s)?;
    check_params(q_min, delta)?;
    let tol = ZERO_TOL * test_scale(v, s, q_min);
    Ok(inertia_count(v, s, delta, q_min, tol))
}

/// Largest `beta` in `[0, q_min]` such that `V + delta I - beta S` has at most
/// `d` negative eigenvalues.
///
/// Equals `clamp(mu_(d+1), 0, q_min)` for the ascending generalized eigenvalues
/// `mu` of `(V + delta I) x = mu S x`.
pub fn beta_star(v: &HermitianMatrix, s: &HermitianMatrix, d: usize, delta: f64, q_min: f64) -> Result<f64> {
    check_pair(v, s)?;
    check_params(q_min, delta)?;
    let n = v.dim();
    if d >= n {
        return Ok(q_min);
    }
    let sdiag = s.matrix().diagonal();
    if !sdiag.iter().all(|z| z.re > 0.0) {
        return Err(Error::NotPositiveDefinite {
            pivot: sdiag.iter().fold(f64::INFINITY, |m, z| m.min(z.re)),
        });
    }
    let tol = ZERO_TOL * test_scale(v, s, q_min);
    // Descending position of the eigenvalue whose sign decides `n(beta) <= d`.
    let idx = n - 1 - d;
    // f(beta) = lambda_idx(beta) + tol >= 0  <=>  n(beta) <= d.
    let curve = |beta: f64| -> Result<(f64, f64)> {
        let sys = eigh(&pencil_at(v, s, delta, beta))?;
        let x = sys.vectors.column(idx);
        let sx = s.matrix() * x;
        let slope = -x.dotc(&sx).re;
        Ok((sys.values[idx] + tol, slope))
    };
    let (f0, d0) = curve(0.0)?;
    if f0 < 0.0 {
        return Ok(0.0);
    }
    let (f1, _) = curve(q_min)?;
    if f1 >= 0.0 {
        return Ok(q_min);
    }
    // Safeguarded Newton on the bracket [lo, hi] with f(lo) >= 0 > f(hi). The
    // curve is concave, so Newton iterates settle on the root from above.
    let (mut lo, mut hi) = (0.0, q_min);
    let (mut beta, mut f, mut slope) = (0.0, f0, d0);
    for _ in 0..200 {
        let newton = if slope < 0.0 { beta - f / slope } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - beta).abs() <= 1e-15 * q_min {
            return Ok(next);
        }
        beta = next;
        (f, slope) = curve(beta)?;
        if f >= 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi - lo <= 4.0 * f64::EPSILON * q_min {
            break;
        }
    }
    Ok(lo)
}

/// Bisection on the inertia predicate, kept as an independent check of [`beta_star`].
pub fn beta_star_bisection_oracle(
    v: &HermitianMatrix,
    s: &HermitianMatrix,
    d: usize,
    delta: f64,
    q_min: f64,
) -> Result<f64> {
    check_pair(v, s)?;
    check_params(q_min, delta)?;
    let tol = ZERO_TOL * test_scale(v, s, q_min);
    let ok = |beta: f64| inertia_count(v, s, delta, beta, tol) <= d;
    if !ok(0.0) {
        return Ok(0.0);
    }
    if ok(q_min) {
        return Ok(q_min);
    }
    let (mut lo, mut hi) = (0.0, q_min);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Per-pixel defect counts, bounds and the admissible box `[0, b_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityBounds {
    /// Negative eigenvalues of `V - q_min S_m + delta I`.
    pub defects: Vec<usize>,
    /// Defect count used for `beta_star`, per the rule.
    pub budgets: Vec<usize>,
    pub beta: Vec<f64>,
    /// `min(q_min, beta_m)`.
    pub upper: Vec<f64>,
    pub delta: f64,
    pub q_min: f64,
    pub rule: DefectRule,
}

impl MonotonicityBounds {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Box with the given upper corner, for callers that already know it.
    pub fn from_upper(upper: Vec<f64>, q_min: f64) -> Result<Self> {
        if let Some(b) = upper.iter().find(|&&b| !(0.0..=q_min).contains(&b)) {
            return Err(Error::Input(format!("box bound {b} outside [0, {q_min}]")));
        }
        Ok(Self {
            defects: vec![0; upper.len()],
            budgets: vec![0; upper.len()],
            beta: upper.clone(),
            upper,
            delta: 0.0,
            q_min,
            rule: DefectRule::default(),
        })
    }
}

/// Computes `d_m`, `beta*_m` and `b_m` for every pixel.
pub fn admissible_bounds(
    v: &HermitianMatrix,
    stack: &SensitivityStack,
    q_min: f64,
    delta: f64,
    rule: DefectRule,
) -> Result<MonotonicityBounds> {
    check_params(q_min, delta)?;
    if v.dim() != stack.n() {
        return Err(Error::Dimension(format!(
            "data is {0}x{0}, sensitivities are {1}x{1}",
            v.dim(),
            stack.n()
        )));
    }
    let v_scale = v.spectral_radius();
    let background = v.shifted(delta).eigenvalues();
    let per_pixel: Vec<Result<(usize, usize, f64)>> = stack
        .matrices()
        .par_iter()
        .map(|s| {
            let defect = defect_count(v, s, q_min, delta)?;
            let budget = match rule {
                DefectRule::ContrastFloor => defect,
                DefectRule::Background => {
                    let tol = ZERO_TOL * (v_scale + q_min * s.spectral_radius());
                    count_negative(&background, tol)
                }
            };
            Ok((defect, budget, beta_star(v, s, budget, delta, q_min)?))
        })
        .collect();
    let mut defects = Vec::with_capacity(stack.len());
    let mut budgets = Vec::with_capacity(stack.len());
    let mut beta = Vec::with_capacity(stack.len());
    for r in per_pixel {
        let (d, b, x) = r?;
        defects.push(d);
        budgets.push(b);
        beta.push(x);
    }
    let upper = beta.iter().map(|&b| b.min(q_min)).collect();
    Ok(MonotonicityBounds {
        defects,
        budgets,
        beta,
        upper,
        delta,
        q_min,
        rule,
    })
}
