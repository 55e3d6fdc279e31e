//! Acceptance criteria. Each test prints one `criterion NN [PASS|FAIL]` line
//! with the measured values, then asserts.

mod support;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use monoreg::born::{sensitivity_quadrature, sensitivity_stack, QuadratureRule, SensitivityStack};
use monoreg::config::{AlphaRule, ExperimentConfig};
use monoreg::forward::{
    add_noise, disk_mie_far_field, far_field_matrix, linearized_far_field, FarFieldMatrix, NoiseModel,
};
use monoreg::geometry::{directions, rasterize, true_support_mask, PixelGrid, ShapeSpec};
use monoreg::linalg::{spectral_norm, HermitianMatrix};
use monoreg::monotonicity::{admissible_bounds, beta_star, beta_star_bisection_oracle, DefectRule};
use monoreg::pipeline::{self, run_pipeline};
use monoreg::reconstruct::{minimize, objective_subgradient, spectral_objective};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use support::{big_sensitivities, certify_definite, jaccard};

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs criteria one at a time so wall-clock limits are not shared.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Written to the real stdout so the line shows even when the test passes.
fn report(id: u32, name: &str, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id:>2} [{verdict}] {name}: {detail}");
    let _ = out.flush();
}

fn rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn scene(k: f64, delta: f64) -> ExperimentConfig {
    ExperimentConfig {
        wave_number: k,
        noise_level: delta,
        ..Default::default()
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn criterion_01_sensitivity_matches_midpoint_quadrature() {
    let _g = serial();
    let start = Instant::now();
    let grid = PixelGrid::new(5.0, 16).unwrap();
    let dirs = directions(8).unwrap();
    let mut worst = Vec::new();
    for k in [0.5, 1.0] {
        let stack = sensitivity_stack(k, &grid, &dirs).unwrap();
        let rule = QuadratureRule::midpoint(64);
        let w = (0..grid.len())
            .map(|m| rel(stack.get(m).matrix(), &sensitivity_quadrature(k, &grid, m, &dirs, &rule).unwrap()))
            .fold(0.0_f64, f64::max);
        worst.push(w);
    }
    let elapsed = start.elapsed().as_secs_f64();
    // Context: the same matrices against 16-point Gauss–Legendre.
    let gl = {
        let stack = sensitivity_stack(1.0, &grid, &dirs).unwrap();
        let rule = QuadratureRule::gauss_legendre(16);
        (0..grid.len())
            .step_by(15)
            .map(|m| rel(stack.get(m).matrix(), &sensitivity_quadrature(1.0, &grid, m, &dirs, &rule).unwrap()))
            .fold(0.0_f64, f64::max)
    };
    let passed = worst.iter().all(|&w| w <= 1e-8) && elapsed < 10.0;
    report(
        1,
        "S_m vs 64x64 midpoint quadrature (tol 1e-8, < 10 s)",
        passed,
        &format!(
            "max rel Frobenius k=0.5: {:.3e}, k=1: {:.3e}; {elapsed:.1} s; vs Gauss-Legendre(16): {gl:.1e}",
            worst[0], worst[1]
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_02_sensitivity_matrices_are_positive_definite() {
    let _g = serial();
    let shift = -300;
    let mut lines = Vec::new();
    let mut passed = true;
    let mut run = |k: f64, side: usize, n: usize, pixels: Vec<usize>| {
        let grid = PixelGrid::new(5.0, side).unwrap();
        let dirs = directions(n).unwrap();
        let certs: Vec<_> = big_sensitivities(k, &grid, &dirs, &pixels)
            .iter()
            .map(|s| certify_definite(s, shift))
            .collect();
        let ok = certs.iter().filter(|c| c.definite).count();
        let min_exp = certs.iter().filter_map(|c| c.min_pivot_exponent).min().unwrap_or(i32::MIN);
        // Double precision cannot resolve these eigenvalues; shown for context.
        let stack = sensitivity_stack(k, &grid, &dirs).unwrap();
        let dmin = pixels
            .iter()
            .map(|&m| {
                let e = stack.get(m).eigenvalues();
                e[e.len() - 1] / e[0]
            })
            .fold(f64::INFINITY, f64::min);
        passed &= ok == pixels.len();
        lines.push(format!(
            "M={side}^2 N={n} k={k}: {ok}/{} certified (smallest pivot ~2^{min_exp}, double eigh min ratio {dmin:.1e})",
            pixels.len()
        ));
    };
    let all16: Vec<usize> = (0..256).collect();
    run(0.5, 16, 8, all16.clone());
    run(1.0, 16, 8, all16);
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    for k in [0.5, 1.0] {
        let pixels = rand::seq::index::sample(&mut rng, 1024, 64).into_vec();
        run(k, 32, 32, pixels);
    }
    report(
        2,
        "min eigenvalue of S_m > 0 (512-bit LDL* of S - 2^-300 max(diag) I)",
        passed,
        &lines.join("; "),
    );
    assert!(passed);
}

#[test]
fn criterion_03_solver_matches_mie_series() {
    let _g = serial();
    let start = Instant::now();
    let grid = PixelGrid::new(5.0, 128).unwrap();
    let dirs = directions(32).unwrap();
    let mut errs = Vec::new();
    for k in [0.5, 1.0] {
        for center in [[0.0, 0.0], [1.5, -2.0]] {
            let disk = ShapeSpec::disk(center, 1.0, 1.0);
            let q = rasterize(&[disk], &grid, 8).unwrap();
            let f = far_field_matrix(k, &q, &dirs).unwrap();
            let mie = disk_mie_far_field(k, 1.0, 1.0, center, &dirs).unwrap();
            errs.push((k, center, rel(&f.data, &mie.data)));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = errs.iter().all(|e| e.2 <= 0.01) && elapsed < 60.0;
    let detail: Vec<String> = errs
        .iter()
        .map(|(k, c, e)| format!("k={k} center={c:?}: {e:.2e}"))
        .collect();
    report(
        3,
        "Lippmann-Schwinger vs Mie, 128^2, tol 1%, < 60 s",
        passed,
        &format!("{}; {elapsed:.1} s", detail.join(", ")),
    );
    assert!(passed);
}

#[test]
fn criterion_04_reciprocity_and_normality() {
    let _g = serial();
    let shapes = ShapeSpec::default_scatterers();
    let dirs = directions(32).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for k in [0.5, 1.0] {
        let far = |side: usize| -> FarFieldMatrix {
            let grid = PixelGrid::new(5.0, side).unwrap();
            far_field_matrix(k, &rasterize(&shapes, &grid, 8).unwrap(), &dirs).unwrap()
        };
        let (coarse, fine) = (far(64), far(128));
        let recip = coarse.reciprocity_defect().max(fine.reciprocity_defect());
        let ratio = coarse.normality_defect() / fine.normality_defect();
        passed &= recip <= 1e-8 && ratio >= 2.0;
        detail.push(format!(
            "k={k}: reciprocity {recip:.1e}, normality {:.2e} -> {:.2e} (factor {ratio:.2})",
            coarse.normality_defect(),
            fine.normality_defect()
        ));
    }
    report(4, "reciprocity 1e-8; normality defect factor >= 2 (64^2 -> 128^2)", passed, &detail.join("; "));
    assert!(passed);
}

#[test]
fn criterion_05_born_remainder_is_quadratic() {
    let _g = serial();
    let shapes = ShapeSpec::default_scatterers();
    let dirs = directions(32).unwrap();
    let grid = PixelGrid::new(5.0, 128).unwrap();
    let q = rasterize(&shapes, &grid, 8).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for k in [0.5, 1.0] {
        let lin = linearized_far_field(k, &q, &dirs).unwrap();
        let err = |eps: f64| {
            let f = far_field_matrix(k, &q.scaled(eps), &dirs).unwrap();
            spectral_norm(&(&f.data - &lin.data * Complex64::new(eps, 0.0))).unwrap()
        };
        let (e2, e1) = (err(0.2), err(0.1));
        let ratio = e2 / e1;
        passed &= (3.0..=5.0).contains(&ratio);
        detail.push(format!("k={k}: {e2:.3e} / {e1:.3e} = {ratio:.3}"));
    }
    report(5, "||F[eps q] - eps F'[0] q||: ratio eps=0.2 / eps=0.1 in [3, 5]", passed, &detail.join("; "));
    assert!(passed);
}

fn random_hermitian(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> HermitianMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    });
    HermitianMatrix::from_matrix(a).unwrap()
}

#[test]
fn criterion_06_beta_star_matches_bisection() {
    let _g = serial();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let grid = PixelGrid::new(5.0, 16).unwrap();
    let dirs = directions(8).unwrap();
    let stacks = [
        sensitivity_stack(0.5, &grid, &dirs).unwrap(),
        sensitivity_stack(1.0, &grid, &dirs).unwrap(),
    ];
    let mut worst_random = 0.0_f64;
    for _ in 0..500 {
        let stack = &stacks[rng.gen_range(0..2)];
        let s = stack.get(rng.gen_range(0..stack.len()));
        let scale = 10f64.powf(rng.gen_range(-3.0..0.0));
        let v = random_hermitian(&mut rng, 8, scale);
        let d = rng.gen_range(0..8);
        let delta = rng.gen_range(0.0..0.1);
        let fast = beta_star(&v, s, d, delta, 1.0).unwrap();
        let slow = beta_star_bisection_oracle(&v, s, d, delta, 1.0).unwrap();
        worst_random = worst_random.max((fast - slow).abs());
    }

    let cfg = scene(0.5, 0.01);
    let sim = pipeline::simulate(&cfg).unwrap();
    let stack = pipeline::build_stack(&cfg).unwrap();
    let v = sim.noisy.self_adjoint_part();
    let bounds = admissible_bounds(&v, &stack, cfg.q_min, cfg.noise_level, cfg.defect_rule).unwrap();
    let worst_full = (0..stack.len())
        .map(|m| {
            let slow =
                beta_star_bisection_oracle(&v, stack.get(m), bounds.budgets[m], cfg.noise_level, cfg.q_min).unwrap();
            (bounds.beta[m] - slow).abs()
        })
        .fold(0.0_f64, f64::max);
    let passed = worst_random <= 1e-8 && worst_full <= 1e-8;
    report(
        6,
        "beta* vs 60-step bisection (tol 1e-8)",
        passed,
        &format!("500 random N=8 pencils: {worst_random:.1e}; all 1024 pixels k=0.5 delta=0.01: {worst_full:.1e}"),
    );
    assert!(passed);
}

fn inverse_crime_exact() -> ExperimentConfig {
    ExperimentConfig {
        wave_number: 0.5,
        n_directions: 16,
        noise_level: 0.0,
        recon_grid: 16,
        alpha_rule: AlphaRule::Fixed(0.0),
        inverse_crime: true,
        ..Default::default()
    }
}

#[test]
fn criterion_07_exact_data_returns_the_corner() {
    let _g = serial();
    let cfg = inverse_crime_exact();
    let sim = pipeline::simulate(&cfg).unwrap();
    let stack = pipeline::build_stack(&cfg).unwrap();
    let rec = pipeline::reconstruct(&cfg, &sim.noisy, &stack).unwrap();
    let gap = rec
        .result
        .coefficients
        .iter()
        .zip(&rec.bounds.upper)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let truth = true_support_mask(&cfg.shapes, &stack.grid).unwrap();
    let mask: Vec<bool> = rec.bounds.upper.iter().map(|&b| b >= cfg.q_min).collect();
    let jac = jaccard(&mask, &truth);
    let fp = mask.iter().zip(&truth).filter(|(p, t)| **p && !**t).count();
    let fneg = mask.iter().zip(&truth).filter(|(p, t)| !**p && **t).count();
    // The literal contrast-floor budget, for context.
    let v = sim.noisy.self_adjoint_part();
    let floor = admissible_bounds(&v, &stack, cfg.q_min, 0.0, DefectRule::ContrastFloor).unwrap();
    let floor_mask: Vec<bool> = floor.upper.iter().map(|&b| b >= cfg.q_min).collect();
    let corner_ok = gap <= 1e-6 * cfg.q_min;
    let support_ok = jac >= 0.9;
    report(
        7,
        "exact data: optimizer at corner (1e-6 q_min) and corner mask Jaccard >= 0.9",
        corner_ok && support_ok,
        &format!(
            "max |a - b| = {gap:.1e} ({}); Jaccard {jac:.3} ({}; {fp} false positives, {fneg} false negatives); \
             contrast-floor budget Jaccard {:.3}",
            if corner_ok { "ok" } else { "fails" },
            if support_ok { "ok" } else { "fails" },
            jaccard(&floor_mask, &truth)
        ),
    );
    assert!(corner_ok, "optimizer left the corner by {gap:e}");
    assert!(support_ok, "corner mask Jaccard {jac}");
}

#[test]
fn criterion_08_beta_star_grows_with_noise() {
    let _g = serial();
    let cfg = scene(0.5, 0.0);
    let sim = pipeline::simulate(&cfg).unwrap();
    let stack = pipeline::build_stack(&cfg).unwrap();
    let levels = [0.0, 0.01, 0.05];
    let betas: Vec<Vec<f64>> = levels
        .iter()
        .map(|&delta| {
            let f = add_noise(&sim.clean, NoiseModel { delta, seed: cfg.seed }).unwrap();
            admissible_bounds(&f.self_adjoint_part(), &stack, cfg.q_min, delta, cfg.defect_rule)
                .unwrap()
                .beta
        })
        .collect();
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for w in betas.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            if b < a {
                violations += 1;
                worst = worst.max(a - b);
            }
        }
    }
    let means: Vec<String> = betas
        .iter()
        .zip(levels)
        .map(|(b, d)| format!("delta={d}: mean {:.4}", b.iter().sum::<f64>() / b.len() as f64))
        .collect();
    let passed = violations == 0;
    report(
        8,
        "beta*(delta) non-decreasing over delta in {0, 0.01, 0.05}, all pixels",
        passed,
        &format!("{violations} decreases (largest {worst:.1e}); {}", means.join(", ")),
    );
    assert!(passed);
}

#[test]
fn criterion_09_regularized_solutions_converge() {
    let _g = serial();
    let cfg = scene(0.5, 0.0);
    let sim = pipeline::simulate(&cfg).unwrap();
    let stack = pipeline::build_stack(&cfg).unwrap();
    let solve = |f: &FarFieldMatrix, delta: f64, alpha: f64| -> Vec<f64> {
        let v = f.self_adjoint_part();
        let bounds = admissible_bounds(&v, &stack, cfg.q_min, delta, cfg.defect_rule).unwrap();
        minimize(&v, &stack, &bounds, alpha, &cfg.optimizer).unwrap().coefficients
    };
    let h0 = solve(&sim.clean, 0.0, 0.0);
    let dists: Vec<(f64, f64)> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&delta| {
            let f = add_noise(&sim.clean, NoiseModel { delta, seed: cfg.seed }).unwrap();
            let h = solve(&f, delta, delta);
            let d = h.iter().zip(&h0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            (delta, d)
        })
        .collect();
    let passed = dists.windows(2).all(|w| w[1].1 <= w[0].1);
    let detail: Vec<String> = dists.iter().map(|(d, e)| format!("delta={d}: {e:.4}")).collect();
    report(9, "||h^delta - h^0|| non-increasing as delta = 0.04, 0.02, 0.01 (alpha = delta)", passed, &detail.join(", "));
    assert!(passed);
}

#[test]
fn criterion_10_subgradient_matches_finite_differences() {
    let _g = serial();
    let cfg = scene(0.5, 0.01);
    let sim = pipeline::simulate(&cfg).unwrap();
    let stack: SensitivityStack = pipeline::build_stack(&cfg).unwrap();
    let v = sim.noisy.self_adjoint_part();
    let bounds = admissible_bounds(&v, &stack, cfg.q_min, cfg.noise_level, cfg.defect_rule).unwrap();
    let alpha = cfg.alpha();
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let h = 1e-6;
    let (mut worst, mut accepted, mut tried) = (0.0_f64, 0, 0);
    while accepted < 50 && tried < 10_000 {
        tried += 1;
        let a: Vec<f64> = bounds.upper.iter().map(|&b| rng.gen_range(0.0..=b)).collect();
        let d: Vec<f64> = (0..stack.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = monoreg::born::linearized_residual(&v, &stack, &a).unwrap();
        // Weyl: no eigenvalue moves further than h ||sum d_m S_m|| over the step.
        let band = 2.0 * h * stack.combine(&d).unwrap().spectral_radius();
        let eig = r.eigenvalues();
        // Rounding-level eigenvalues sit in the shared numerical null space and
        // move by O(eps) under the step; everything else must clear the band,
        // and the positive part must be simple.
        let floor = 64.0 * f64::EPSILON * eig.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let clear = eig.iter().all(|x| x.abs() <= floor || x.abs() > band);
        let pos: Vec<f64> = eig.iter().copied().filter(|&x| x > band).collect();
        let simple = pos.windows(2).all(|w| (w[0] - w[1]).abs() > band);
        if !(clear && simple && !pos.is_empty()) {
            continue;
        }
        accepted += 1;
        let f = |t: f64| {
            let x: Vec<f64> = a.iter().zip(&d).map(|(a, d)| a + t * d).collect();
            spectral_objective(&monoreg::born::linearized_residual(&v, &stack, &x).unwrap(), alpha)
        };
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let g = objective_subgradient(&v, &stack, &a, alpha).unwrap();
        let dot: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
        worst = worst.max((fd - dot).abs() / dot.abs());
    }
    let passed = accepted == 50 && worst <= 1e-4;
    report(
        10,
        "central differences (h = 1e-6) vs <g, d> at 50 separated feasible points (tol 1e-4)",
        passed,
        &format!("worst relative gap {worst:.2e} over {accepted} points ({tried} drawn)"),
    );
    assert!(passed);
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
struct JaccardBaseline {
    reconstruction: f64,
    corner: f64,
    tikhonov: f64,
    factorization: f64,
}

fn baseline_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("baselines").join("jaccard.json")
}

#[test]
fn criterion_11_shipped_config_runs() {
    let _g = serial();
    pipeline::set_deterministic();
    let path = baseline_path();
    let mut stored: BTreeMap<String, JaccardBaseline> = std::fs::read_to_string(&path)
        .ok()
        .map(|t| serde_json::from_str(&t).expect("baseline file parses"))
        .unwrap_or_default();
    let mut recorded = false;
    let mut passed = true;
    let mut detail = Vec::new();
    let tmp = tempfile::tempdir().unwrap();
    for name in ["k0p5_delta0p01", "k0p5_delta0p05", "k1_delta0p01", "k1_delta0p05"] {
        let mut cfg = ExperimentConfig::load(&configs_dir().join(format!("{name}.json"))).unwrap();
        assert_eq!((cfg.n_directions, cfg.recon_grid, cfg.roi_half_width, cfg.q_min), (32, 32, 5.0, 1.0));
        assert_eq!(cfg.alpha(), cfg.noise_level);
        cfg.output_dir = tmp.path().join(name);
        let start = Instant::now();
        let report = run_pipeline(&cfg).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let fields = [pipeline::RECONSTRUCTION_FILE, pipeline::BETA_FILE, pipeline::TIKHONOV_FILE, pipeline::FACTORIZATION_FILE];
        let all_fields = fields.iter().all(|f| report.manifest.get(f).is_some() && cfg.output_dir.join(f).exists());
        let m = &report.metrics;
        let got = JaccardBaseline {
            reconstruction: m.reconstruction.jaccard,
            corner: m.corner.jaccard,
            tikhonov: m.tikhonov.as_ref().map_or(f64::NAN, |t| t.jaccard),
            factorization: m.factorization.as_ref().map_or(f64::NAN, |t| t.jaccard),
        };
        let matches = match stored.get(name) {
            Some(b) => {
                [
                    (b.reconstruction, got.reconstruction),
                    (b.corner, got.corner),
                    (b.tikhonov, got.tikhonov),
                    (b.factorization, got.factorization),
                ]
                .iter()
                .all(|(x, y)| (x - y).abs() <= 0.02)
            }
            None => {
                stored.insert(name.to_string(), got);
                recorded = true;
                true
            }
        };
        passed &= elapsed < 120.0 && all_fields && matches;
        detail.push(format!(
            "{name}: {elapsed:.1} s, Jaccard rec {:.3} corner {:.3} tikh {:.3} fact {:.3}{}",
            got.reconstruction,
            got.corner,
            got.tikhonov,
            got.factorization,
            if matches { "" } else { " (baseline drift > 0.02)" }
        ));
    }
    if recorded && passed {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&stored).unwrap() + "\n").unwrap();
        detail.push(format!("baselines recorded to {}", path.display()));
    }
    report(11, "four shipped configs: < 120 s each, all fields, Jaccard within 0.02 of baseline", passed, &detail.join("; "));
    assert!(passed);
}

#[test]
fn criterion_12_deterministic_artifacts() {
    let _g = serial();
    pipeline::set_deterministic();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs_dir().join("k0p5_delta0p01.json")).unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|d| {
            let cfg = ExperimentConfig {
                output_dir: tmp.path().join(d),
                ..cfg.clone()
            };
            run_pipeline(&cfg).unwrap()
        })
        .collect();
    let csvs: Vec<&str> = runs[0]
        .manifest
        .files
        .iter()
        .map(|e| e.file.as_str())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    let identical = csvs.iter().all(|f| {
        std::fs::read(runs[0].dir.join(f)).unwrap() == std::fs::read(runs[1].dir.join(f)).unwrap()
            && runs[0].manifest.get(f).map(|e| &e.sha256) == runs[1].manifest.get(f).map(|e| &e.sha256)
    });
    let passed = identical && csvs.len() == 5;
    report(
        12,
        "same config and seed in deterministic mode gives byte-identical CSVs",
        passed,
        &format!(
            "{} CSVs and their manifest hashes {}",
            csvs.len(),
            if identical { "identical" } else { "differ" }
        ),
    );
    assert!(passed);
}
