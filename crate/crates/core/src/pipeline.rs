//! The experiment pipeline: simulate → noise → V^δ → sensitivity stack →
//! bounds → minimize → baselines → metrics, with artifacts on disk.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::born::{sensitivity_stack, SensitivityStack};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forward::{add_noise, far_field_matrix, FarFieldMatrix, NoiseModel, RNG_ALGORITHM};
use crate::geometry::{directions, rasterize, true_support_mask, PixelGrid};
use crate::io::{far_field_csv, grid_csv, read_far_field, ArtifactWriter, FarFieldMeta, Manifest};
use crate::linalg::HermitianMatrix;
use crate::monotonicity::{admissible_bounds, MonotonicityBounds};
use crate::reconstruct::{
    factorization_indicator, minimize, support_metrics, tikhonov_linearized, IndicatorField, ReconstructionResult,
    StopReason, SupportMetrics, ThresholdRule, FACTORIZATION_VARIANT,
};

pub const FAR_FIELD_FILE: &str = "far_field.csv";
pub const FAR_FIELD_META_FILE: &str = "far_field.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";
pub const BETA_FILE: &str = "beta_star.csv";
pub const TIKHONOV_FILE: &str = "tikhonov.csv";
pub const FACTORIZATION_FILE: &str = "factorization.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.json";

/// Switches linear algebra to single-threaded kernels.
///
/// Per-pixel parallel maps keep their order, so this is all that is needed for
/// bit-identical reruns.
pub fn set_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.at_stage(name));
    log::info!("{name}: {:.2} s", start.elapsed().as_secs_f64());
    out
}

pub fn recon_grid(cfg: &ExperimentConfig) -> Result<PixelGrid> {
    PixelGrid::new(cfg.roi_half_width, cfg.recon_grid)
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub clean: FarFieldMatrix,
    pub noisy: FarFieldMatrix,
    pub meta: FarFieldMeta,
}

/// Far-field data of the configured scene plus seeded noise of norm `δ`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    cfg.validate()?;
    let (side, subsamples) = cfg.simulation_grid();
    let grid = PixelGrid::new(cfg.roi_half_width, side)?;
    let dirs = directions(cfg.n_directions)?;
    let clean = stage("simulate", || {
        let q = rasterize(&cfg.shapes, &grid, subsamples)?;
        far_field_matrix(cfg.wave_number, &q, &dirs)
    })?;
    let noisy = stage("noise", || {
        add_noise(
            &clean,
            NoiseModel {
                delta: cfg.noise_level,
                seed: cfg.seed,
            },
        )
    })?;
    let meta = FarFieldMeta {
        wave_number: cfg.wave_number,
        n_directions: cfg.n_directions,
        grid,
        subsamples,
        seed: cfg.seed,
        noise_level: cfg.noise_level,
        rng: RNG_ALGORITHM.to_string(),
        inverse_crime: cfg.inverse_crime,
    };
    Ok(Simulation { clean, noisy, meta })
}

fn check_data(cfg: &ExperimentConfig, f: &FarFieldMatrix) -> Result<()> {
    if f.n() != cfg.n_directions || f.k != cfg.wave_number {
        return Err(Error::Config(format!(
            "far field has k = {}, N = {} but the config asks for k = {}, N = {}",
            f.k,
            f.n(),
            cfg.wave_number,
            cfg.n_directions
        )));
    }
    Ok(())
}

pub fn build_stack(cfg: &ExperimentConfig) -> Result<SensitivityStack> {
    let dirs = directions(cfg.n_directions)?;
    stage("sensitivity", || sensitivity_stack(cfg.wave_number, &recon_grid(cfg)?, &dirs))
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub bounds: MonotonicityBounds,
    pub result: ReconstructionResult,
    pub alpha: f64,
}

pub fn reconstruct(cfg: &ExperimentConfig, f: &FarFieldMatrix, stack: &SensitivityStack) -> Result<Reconstruction> {
    check_data(cfg, f)?;
    let v = f.self_adjoint_part();
    let bounds = stage("bounds", || {
        admissible_bounds(&v, stack, cfg.q_min, cfg.noise_level, cfg.defect_rule)
    })?;
    let alpha = cfg.alpha();
    let result = stage("minimize", || minimize(&v, stack, &bounds, alpha, &cfg.optimizer))?;
    Ok(Reconstruction { bounds, result, alpha })
}

#[derive(Debug, Clone)]
pub struct Baselines {
    /// Absent for exact data: the Tikhonov baseline needs `δ > 0`.
    pub tikhonov: Option<IndicatorField>,
    pub factorization: IndicatorField,
}

pub fn baselines(cfg: &ExperimentConfig, f: &FarFieldMatrix, stack: &SensitivityStack) -> Result<Baselines> {
    check_data(cfg, f)?;
    let v: HermitianMatrix = f.self_adjoint_part();
    let tikhonov = if cfg.noise_level > 0.0 {
        Some(stage("tikhonov", || {
            tikhonov_linearized(&v, stack, cfg.noise_level, stack.grid.ell())
        })?)
    } else {
        log::warn!("noise_level = 0: skipping the Tikhonov baseline");
        None
    };
    let factorization = stage("factorization", || factorization_indicator(f, &stack.grid, cfg.wave_number))?;
    Ok(Baselines { tikhonov, factorization })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub alpha: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub objective: f64,
    pub initial_objective: f64,
    pub positive_sum: f64,
    pub frobenius_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    /// Pixels with `b_m = q_min`.
    pub saturated: usize,
    pub mean: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub wave_number: f64,
    pub n_directions: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub rng: String,
    pub factorization_variant: String,
    pub reconstruction: SupportMetrics,
    /// The `{b_m >= q_min}` mask of the admissible box.
    pub corner: SupportMetrics,
    pub tikhonov: Option<SupportMetrics>,
    pub factorization: Option<SupportMetrics>,
    pub optimizer: Option<OptimizerSummary>,
    pub bounds: Option<BoundsSummary>,
    pub warnings: Vec<String>,
}

fn bounds_summary(b: &MonotonicityBounds) -> BoundsSummary {
    BoundsSummary {
        saturated: b.upper.iter().filter(|&&x| x >= b.q_min).count(),
        mean: b.upper.iter().sum::<f64>() / b.len().max(1) as f64,
        min: b.upper.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn metrics(
    cfg: &ExperimentConfig,
    rec: &Reconstruction,
    base: &Baselines,
    warnings: Vec<String>,
) -> Result<ExperimentMetrics> {
    let grid = recon_grid(cfg)?;
    let truth = true_support_mask(&cfg.shapes, &grid)?;
    let field = IndicatorField::new(grid, rec.result.coefficients.clone())?;
    let corner = IndicatorField::new(grid, rec.bounds.upper.clone())?;
    let top = ThresholdRule::matching(&truth);
    Ok(ExperimentMetrics {
        wave_number: cfg.wave_number,
        n_directions: cfg.n_directions,
        noise_level: cfg.noise_level,
        seed: cfg.seed,
        rng: RNG_ALGORITHM.to_string(),
        factorization_variant: FACTORIZATION_VARIANT.to_string(),
        reconstruction: support_metrics(&field, &truth, ThresholdRule::reconstruction(cfg.q_min))?,
        corner: support_metrics(&corner, &truth, ThresholdRule::Absolute { threshold: cfg.q_min })?,
        tikhonov: base.tikhonov.as_ref().map(|t| support_metrics(t, &truth, top)).transpose()?,
        factorization: Some(support_metrics(&base.factorization, &truth, top)?),
        optimizer: Some(OptimizerSummary {
            alpha: rec.alpha,
            iterations: rec.result.iterations,
            stop_reason: rec.result.stop_reason,
            objective: rec.result.objective,
            initial_objective: rec.result.trajectory[0].value,
            positive_sum: rec.result.positive_sum,
            frobenius_residual: rec.result.frobenius_residual,
        }),
        bounds: Some(bounds_summary(&rec.bounds)),
        warnings,
    })
}

fn sampling_warnings(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let warnings: Vec<String> = cfg.undersampled()?.into_iter().collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(warnings)
}

fn write_far_field(w: &mut ArtifactWriter, sim: &FarFieldMatrix, meta: &FarFieldMeta) -> Result<()> {
    w.write(FAR_FIELD_FILE, &far_field_csv(sim)?)?;
    w.write_json(FAR_FIELD_META_FILE, meta)?;
    Ok(())
}

fn write_reconstruction(w: &mut ArtifactWriter, grid: &PixelGrid, rec: &Reconstruction) -> Result<()> {
    w.write(RECONSTRUCTION_FILE, &grid_csv(grid, &rec.result.coefficients)?)?;
    w.write(BETA_FILE, &grid_csv(grid, &rec.bounds.upper)?)?;
    Ok(())
}

fn write_baselines(w: &mut ArtifactWriter, base: &Baselines) -> Result<()> {
    if let Some(t) = &base.tikhonov {
        w.write(TIKHONOV_FILE, &grid_csv(&t.grid, &t.values)?)?;
    }
    let f = &base.factorization;
    w.write(FACTORIZATION_FILE, &grid_csv(&f.grid, &f.values)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub metrics: ExperimentMetrics,
    pub simulation: Simulation,
    pub reconstruction: Reconstruction,
    pub baselines: Baselines,
}

/// Runs every stage and writes all artifacts into `cfg.output_dir`.
///
/// On error, files written by this run are removed.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let warnings = sampling_warnings(cfg)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    w.write(CONFIG_FILE, format!("{}\n", cfg.to_json()?).as_bytes())?;
    let simulation = simulate(cfg)?;
    write_far_field(&mut w, &simulation.noisy, &simulation.meta)?;
    let stack = build_stack(cfg)?;
    let reconstruction = reconstruct(cfg, &simulation.noisy, &stack)?;
    write_reconstruction(&mut w, &stack.grid, &reconstruction)?;
    let baselines = baselines(cfg, &simulation.noisy, &stack)?;
    write_baselines(&mut w, &baselines)?;
    let metrics = stage("metrics", || metrics(cfg, &reconstruction, &baselines, warnings))?;
    w.write_json(METRICS_FILE, &metrics)?;
    let dir = w.dir().to_path_buf();
    let manifest = w.commit()?;
    Ok(PipelineReport {
        dir,
        manifest,
        metrics,
        simulation,
        reconstruction,
        baselines,
    })
}

/// `simulate` subcommand: far-field CSV and sidecar only.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    sampling_warnings(cfg)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let sim = simulate(cfg)?;
    write_far_field(&mut w, &sim.noisy, &sim.meta)?;
    w.commit()
}

/// Reads the far field from `input`, or from the output directory.
fn load_far_field(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<FarFieldMatrix> {
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join(FAR_FIELD_FILE));
    let (f, meta) = read_far_field(&path).map_err(|e| e.at_stage("load"))?;
    if meta.noise_level != cfg.noise_level {
        log::warn!(
            "far field was generated with noise level {}, config uses {}",
            meta.noise_level,
            cfg.noise_level
        );
    }
    Ok(f)
}

/// `reconstruct` subcommand: bounds and minimizer from stored data.
pub fn run_reconstruct(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let f = load_far_field(cfg, input)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let stack = build_stack(cfg)?;
    let rec = reconstruct(cfg, &f, &stack)?;
    write_reconstruction(&mut w, &stack.grid, &rec)?;
    w.commit()
}

/// `baselines` subcommand: Tikhonov and factorization fields from stored data.
pub fn run_baselines(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let f = load_far_field(cfg, input)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let stack = build_stack(cfg)?;
    let base = baselines(cfg, &f, &stack)?;
    write_baselines(&mut w, &base)?;
    w.commit()
}
