//! The regularized spectral minimization over the admissible box, plus the
//! linearized Tikhonov and factorization-method baselines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::born::SensitivityStack;
use crate::error::{Error, Result};
use crate::forward::FarFieldMatrix;
use crate::geometry::PixelGrid;
use crate::linalg::{eigh, self_adjoint_part, skew_adjoint_part, solve_spd, HermitianMatrix};
use crate::monotonicity::MonotonicityBounds;

/// `Σ_{λ_j > 0} λ_j(R) + α ||R||_F`.
pub fn spectral_objective(r: &HermitianMatrix, alpha: f64) -> f64 {
    positive_sum(&r.eigenvalues()) + alpha * r.frobenius_norm()
}

fn positive_sum(values: &[f64]) -> f64 {
    values.iter().filter(|&&v| v > 0.0).sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Input(format!("regularization parameter must be >= 0, got {alpha}")));
    }
    Ok(())
}

/// Subgradient of the objective with respect to the pixel coefficients, given
/// the residual `R`.
fn subgradient_at(r: &HermitianMatrix, stack: &SensitivityStack, alpha: f64) -> Result<Vec<f64>> {
    let sys = eigh(r)?;
    let mut w = sys.reassemble(|lam| if lam > 0.0 { 1.0 } else { 0.0 });
    let norm = r.frobenius_norm();
    if alpha > 0.0 && norm > 0.0 {
        w.axpy(alpha / norm, r);
    }
    Ok(stack.traces_against(&w)?.into_iter().map(|t| -t).collect())
}

/// `g_m = -tr(P_+ S_m) - α tr(R S_m) / ||R||_F` at `R = V - Σ a_m S_m`.
///
/// The Frobenius term is dropped where `R = 0`.
pub fn objective_subgradient(v: &HermitianMatrix, stack: &SensitivityStack, a: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let r = crate::born::linearized_residual(v, stack, a)?;
    subgradient_at(&r, stack, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop when the best value improves by less than `tol * |f_0|` over `window` iterations.
    pub tol: f64,
    pub window: usize,
    /// Largest coordinate move of the first step, as a fraction of `q_min`.
    pub first_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            window: 50,
            first_step: 0.05,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("optimizer max_iters must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("optimizer window must be at least 1".into()));
        }
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!("optimizer tol must be >= 0, got {}", self.tol)));
        }
        if !(self.first_step > 0.0) || !self.first_step.is_finite() {
            return Err(Error::Config(format!(
                "optimizer first_step must be positive, got {}",
                self.first_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every `b_m = 0`, so the box is a single point.
    SingletonBox,
    /// No coordinate can move: the projected subgradient vanishes.
    Stationary,
    Stagnated,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub value: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub coefficients: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub objective: f64,
    /// Sum of the positive eigenvalues of the final residual.
    pub positive_sum: f64,
    pub frobenius_residual: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Projected subgradient descent on `[0, b_m]^M`, started at the upper corner.
///
/// Steps are `t_0 / sqrt(i)`, with `t_0` set on the first iteration so the
/// largest coordinate move is `first_step * q_min`. The best iterate is returned.
pub fn minimize(
    v: &HermitianMatrix,
    stack: &SensitivityStack,
    bounds: &MonotonicityBounds,
    alpha: f64,
    options: &OptimizerOptions,
) -> Result<ReconstructionResult> {
    options.validate()?;
    check_alpha(alpha)?;
    if bounds.len() != stack.len() {
        return Err(Error::Dimension(format!(
            "{} bounds for {} pixels",
            bounds.len(),
            stack.len()
        )));
    }
    let upper = &bounds.upper;
    let eval = |a: &[f64]| -> Result<(HermitianMatrix, f64, f64)> {
        let r = crate::born::linearized_residual(v, stack, a)?;
        let pos = positive_sum(&r.eigenvalues());
        let fro = r.frobenius_norm();
        Ok((r, pos, fro))
    };
    let finish = |a: Vec<f64>, trajectory, iterations, stop_reason| -> Result<ReconstructionResult> {
        let (_, positive_sum, frobenius_residual) = eval(&a)?;
        Ok(ReconstructionResult {
            coefficients: a,
            trajectory,
            objective: positive_sum + alpha * frobenius_residual,
            positive_sum,
            frobenius_residual,
            iterations,
            stop_reason,
        })
    };

    let mut a = upper.clone();
    let (mut r, pos0, fro0) = eval(&a)?;
    let f0 = pos0 + alpha * fro0;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        value: f0,
        best: f0,
    }];
    if upper.iter().all(|&b| b == 0.0) {
        return finish(a, trajectory, 0, StopReason::SingletonBox);
    }

    let mut best = (a.clone(), f0);
    let floor = options.tol * f0.abs();
    let mut t0: Option<f64> = None;
    let mut reason = StopReason::MaxIterations;
    let mut iterations = options.max_iters;
    for i in 1..=options.max_iters {
        let g = subgradient_at(&r, stack, alpha)?;
        let movable = |m: usize| (g[m] < 0.0 && a[m] < upper[m]) || (g[m] > 0.0 && a[m] > 0.0);
        let gmax = (0..g.len()).filter(|&m| movable(m)).fold(0.0_f64, |acc, m| acc.max(g[m].abs()));
        if gmax == 0.0 {
            reason = StopReason::Stationary;
            iterations = i - 1;
            break;
        }
        let t = *t0.get_or_insert(options.first_step * bounds.q_min / gmax) / (i as f64).sqrt();
        for m in 0..a.len() {
            a[m] = (a[m] - t * g[m]).clamp(0.0, upper[m]);
        }
        debug_assert!(a.iter().zip(upper).all(|(&x, &b)| (0.0..=b).contains(&x)));
        let (r_new, pos, fro) = eval(&a)?;
        r = r_new;
        let f = pos + alpha * fro;
        if f < best.1 {
            best = (a.clone(), f);
        }
        trajectory.push(TrajectoryPoint {
            iteration: i,
            value: f,
            best: best.1,
        });
        if i >= options.window && trajectory[i - options.window].best - best.1 <= floor {
            reason = StopReason::Stagnated;
            iterations = i;
            break;
        }
    }
    finish(best.0, trajectory, iterations, reason)
}

/// A real value per pixel: coefficients, baseline coefficients or indicator values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorField {
    pub grid: PixelGrid,
    pub values: Vec<f64>,
}

impl IndicatorField {
    pub fn new(grid: PixelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} pixels",
                values.len(),
                grid.len()
            )));
        }
        if let Some(m) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite value at pixel {m}")));
        }
        Ok(Self { grid, values })
    }
}

/// `Re <S_m, S_n>_F` for all pixel pairs.
///
/// The inner product depends only on `z_m - z_n`, so it is tabulated once per
/// grid offset.
pub fn gram_matrix(stack: &SensitivityStack) -> DMatrix<f64> {
    let grid = stack.grid;
    let side = grid.side;
    let ell = grid.ell();
    let n = stack.n();
    let units = stack.dirs.units();
    // |S_m(l, j)|^2 is the same for every pixel.
    let weights: Vec<(f64, [f64; 2])> = (0..n)
        .flat_map(|l| (0..n).map(move |j| (l, j)))
        .map(|(l, j)| {
            let e = stack.get(0).matrix()[(l, j)].norm_sqr();
            (e, [units[j][0] - units[l][0], units[j][1] - units[l][1]])
        })
        .collect();
    let span = 2 * side - 1;
    let k = stack.k;
    let table: Vec<f64> = (0..span * span)
        .map(|t| {
            let dx = (t % span) as f64 - (side - 1) as f64;
            let dy = (t / span) as f64 - (side - 1) as f64;
            weights
                .iter()
                .map(|(e, d)| e * (k * ell * (dx * d[0] + dy * d[1])).cos())
                .sum()
        })
        .collect();
    let m = grid.len();
    DMatrix::from_fn(m, m, |a, b| {
        let dx = (a % side) as isize - (b % side) as isize + side as isize - 1;
        let dy = (a / side) as isize - (b / side) as isize + side as isize - 1;
        table[dy as usize * span + dx as usize]
    })
}

/// Minimizer of `||R(h)||_F^2 + δ ||h||_{L^2}^2` over unconstrained real coefficients.
pub fn tikhonov_linearized(v: &HermitianMatrix, stack: &SensitivityStack, delta: f64, ell: f64) -> Result<IndicatorField> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Input(format!("Tikhonov baseline needs a positive noise level, got {delta}")));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::Input(format!("pixel side must be positive, got {ell}")));
    }
    let mut g = gram_matrix(stack);
    let shift = delta * ell * ell;
    for i in 0..g.nrows() {
        g[(i, i)] += shift;
    }
    let c = DVector::from_vec(stack.traces_against(v)?);
    let cn = c.norm();
    if cn == 0.0 {
        return IndicatorField::new(stack.grid, vec![0.0; stack.len()]);
    }
    let a = solve_spd(&g, &c)?;
    let residual = (&g * &a - &c).norm() / cn;
    if !(residual <= 1e-10) {
        return Err(Error::Solver(format!(
            "Tikhonov normal equations residual {residual:e} exceeds 1e-10"
        )));
    }
    IndicatorField::new(stack.grid, a.iter().copied().collect())
}

/// Relative eigenvalue cutoff of the Picard sum.
pub const PICARD_CUTOFF: f64 = 1e-14;

/// Name of the factorization variant, recorded in metadata.
pub const FACTORIZATION_VARIANT: &str = "F# = |Re F| + |Im F|, Picard cutoff 1e-14 * lambda_max";

/// `-log W(z)` with `W` the Picard sum of the test vector `r_z` against `F#`.
pub fn factorization_indicator(f: &FarFieldMatrix, grid: &PixelGrid, k: f64) -> Result<IndicatorField> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Input(format!("wavenumber must be positive, got {k}")));
    }
    let re = eigh(&self_adjoint_part(&f.data)?)?.reassemble(f64::abs);
    let im = eigh(&skew_adjoint_part(&f.data)?)?.reassemble(f64::abs);
    let mut sharp = re;
    sharp.axpy(1.0, &im);
    let sys = eigh(&sharp)?;
    let lmax = sys.values.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Err(Error::Degenerate("far-field matrix has no spectrum above the Picard cutoff".into()));
    }
    let keep: Vec<usize> = (0..sys.values.len())
        .filter(|&j| sys.values[j] > PICARD_CUTOFF * lmax)
        .collect();
    let units = f.dirs.units();
    let values = grid
        .centers()
        .iter()
        .map(|z| {
            let r = DVector::from_iterator(
                units.len(),
                units.iter().map(|x| {
                    let p = -k * (x[0] * z[0] + x[1] * z[1]);
                    Complex64::new(p.cos(), p.sin())
                }),
            );
            let w: f64 = keep
                .iter()
                .map(|&j| sys.vectors.column(j).dotc(&r).norm_sqr() / sys.values[j])
                .sum();
            -w.ln()
        })
        .collect();
    IndicatorField::new(*grid, values)
}

/// How a real field is turned into a predicted support mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `value >= threshold`.
    Absolute { threshold: f64 },
    /// The `count` largest values (ties at the cut are included).
    TopCount { count: usize },
}

impl ThresholdRule {
    /// Half the contrast floor, for reconstructed coefficients.
    pub fn reconstruction(q_min: f64) -> Self {
        ThresholdRule::Absolute { threshold: 0.5 * q_min }
    }

    /// As many cells as the true support, for indicator fields.
    pub fn matching(truth: &[bool]) -> Self {
        ThresholdRule::TopCount {
            count: truth.iter().filter(|&&t| t).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub jaccard: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Distance between the centroids of predicted and true support; absent if either is empty.
    pub centroid_distance: Option<f64>,
    pub threshold: f64,
    pub predicted_count: usize,
    pub true_count: usize,
}

fn centroid(grid: &PixelGrid, mask: &[bool]) -> Option<[f64; 2]> {
    let cells: Vec<[f64; 2]> = (0..mask.len()).filter(|&m| mask[m]).map(|m| grid.center(m)).collect();
    if cells.is_empty() {
        return None;
    }
    let n = cells.len() as f64;
    Some([
        cells.iter().map(|c| c[0]).sum::<f64>() / n,
        cells.iter().map(|c| c[1]).sum::<f64>() / n,
    ])
}

/// Compares the thresholded field against the true pixel mask.
pub fn support_metrics(field: &IndicatorField, truth: &[bool], rule: ThresholdRule) -> Result<SupportMetrics> {
    if truth.len() != field.values.len() {
        return Err(Error::Dimension(format!(
            "mask has {} pixels, field has {}",
            truth.len(),
            field.values.len()
        )));
    }
    let threshold = match rule {
        ThresholdRule::Absolute { threshold } => threshold,
        ThresholdRule::TopCount { count } => {
            if count == 0 {
                f64::INFINITY
            } else {
                let mut sorted = field.values.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                sorted[count.min(sorted.len()) - 1]
            }
        }
    };
    let predicted: Vec<bool> = field.values.iter().map(|&v| v >= threshold).collect();
    let both = predicted.iter().zip(truth).filter(|(p, t)| **p && **t).count();
    let either = predicted.iter().zip(truth).filter(|(p, t)| **p || **t).count();
    let false_positives = predicted.iter().zip(truth).filter(|(p, t)| **p && !**t).count();
    let false_negatives = predicted.iter().zip(truth).filter(|(p, t)| !**p && **t).count();
    let centroid_distance = match (centroid(&field.grid, &predicted), centroid(&field.grid, truth)) {
        (Some(a), Some(b)) => Some((a[0] - b[0]).hypot(a[1] - b[1])),
        _ => None,
    };
    Ok(SupportMetrics {
        jaccard: if either == 0 { 1.0 } else { both as f64 / either as f64 },
        false_positives,
        false_negatives,
        centroid_distance,
        threshold,
        predicted_count: predicted.iter().filter(|&&p| p).count(),
        true_count: truth.iter().filter(|&&t| t).count(),
    })
}
