//! Experiment configuration: a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::ShapeSpec;
use crate::monotonicity::DefectRule;
use crate::reconstruct::OptimizerOptions;

/// Regularization parameter `α`: a fixed value or `α = δ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlphaRule {
    #[default]
    Delta,
    Fixed(f64),
}

impl AlphaRule {
    pub fn alpha(&self, delta: f64) -> f64 {
        match *self {
            AlphaRule::Delta => delta,
            AlphaRule::Fixed(a) => a,
        }
    }
}

impl Serialize for AlphaRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            AlphaRule::Delta => s.serialize_str("delta"),
            AlphaRule::Fixed(a) => s.serialize_f64(a),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(a) => Ok(AlphaRule::Fixed(a)),
            Raw::Name(s) if s == "delta" => Ok(AlphaRule::Delta),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "alpha_rule must be \"delta\" or a number, got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub wave_number: f64,
    pub n_directions: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub roi_half_width: f64,
    pub recon_grid: usize,
    pub forward_grid: usize,
    pub forward_subsamples: usize,
    pub shapes: Vec<ShapeSpec>,
    pub q_min: f64,
    pub alpha_rule: AlphaRule,
    pub optimizer: OptimizerOptions,
    /// Simulate on the reconstruction grid with center-point rasterization.
    pub inverse_crime: bool,
    pub output_dir: PathBuf,
    pub defect_rule: DefectRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            wave_number: 0.5,
            n_directions: 32,
            noise_level: 0.01,
            seed: 1,
            roi_half_width: 5.0,
            recon_grid: 32,
            forward_grid: 128,
            forward_subsamples: 8,
            shapes: ShapeSpec::default_scatterers(),
            q_min: 1.0,
            alpha_rule: AlphaRule::Delta,
            optimizer: OptimizerOptions::default(),
            inverse_crime: false,
            output_dir: PathBuf::from("out"),
            defect_rule: DefectRule::default(),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        positive("wave_number", self.wave_number)?;
        if self.n_directions < 4 || self.n_directions % 2 != 0 {
            return Err(Error::Config(format!(
                "n_directions must be even and >= 4, got {}",
                self.n_directions
            )));
        }
        if !(self.noise_level >= 0.0) || !self.noise_level.is_finite() {
            return Err(Error::Config(format!("noise_level must be >= 0, got {}", self.noise_level)));
        }
        positive("roi_half_width", self.roi_half_width)?;
        positive("q_min", self.q_min)?;
        for (name, side) in [("recon_grid", self.recon_grid), ("forward_grid", self.forward_grid)] {
            if side < 4 {
                return Err(Error::Config(format!("{name} must be >= 4, got {side}")));
            }
        }
        if self.forward_subsamples == 0 {
            return Err(Error::Config("forward_subsamples must be >= 1".into()));
        }
        if let AlphaRule::Fixed(a) = self.alpha_rule {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("fixed alpha must be >= 0, got {a}")));
            }
        }
        self.optimizer.validate()?;
        for shape in &self.shapes {
            shape.validate(self.roi_half_width)?;
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_rule.alpha(self.noise_level)
    }

    /// Forward grid side and subsamples actually used for simulation.
    pub fn simulation_grid(&self) -> (usize, usize) {
        if self.inverse_crime {
            (self.recon_grid, 1)
        } else {
            (self.forward_grid, self.forward_subsamples)
        }
    }

    /// Radius of the smallest origin-centered disk containing every shape.
    pub fn scatterer_radius(&self) -> Result<f64> {
        let mut r = 0.0_f64;
        for shape in &self.shapes {
            for p in shape.prepare()?.boundary_samples(256) {
                r = r.max(p[0].hypot(p[1]));
            }
        }
        Ok(r)
    }

    /// `N ≳ 2kR` heuristic for enough directions.
    pub fn undersampled(&self) -> Result<Option<String>> {
        let need = 2.0 * self.wave_number * self.scatterer_radius()?;
        Ok(((self.n_directions as f64) < need).then(|| {
            format!(
                "{} directions may be too few: 2kR = {need:.2}",
                self.n_directions
            )
        }))
    }
}
