//! Pixel grids over the square region of interest, scatterer shapes and
//! their rasterization, and equidistant direction sets.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// `N` equidistant unit vectors `theta_n = (cos phi_n, sin phi_n)`, `phi_n = 2 pi n / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    n: usize,
}

impl DirectionSet {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "direction count must be even and >= 2, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    pub fn unit(&self, i: usize) -> Point {
        let phi = self.angle(i);
        [phi.cos(), phi.sin()]
    }

    /// Index of `-theta_i`.
    pub fn opposite(&self, i: usize) -> usize {
        (i + self.n / 2) % self.n
    }

    pub fn units(&self) -> Vec<Point> {
        (0..self.n).map(|i| self.unit(i)).collect()
    }
}

pub fn directions(n: usize) -> Result<DirectionSet> {
    DirectionSet::new(n)
}

/// Uniform `side x side` partition of `[-half_width, half_width]^2`.
///
/// Pixel `m = iy * side + ix` has center
/// `(-half_width + (ix + 1/2) ell, -half_width + (iy + 1/2) ell)`, so `x`
/// runs fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub half_width: f64,
    pub side: usize,
}

impl PixelGrid {
    pub fn new(half_width: f64, side: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Input(format!("half width must be positive, got {half_width}")));
        }
        if side == 0 {
            return Err(Error::Input("grid needs at least one pixel per side".into()));
        }
        Ok(Self { half_width, side })
    }

    /// Pixel side length.
    pub fn ell(&self) -> f64 {
        2.0 * self.half_width / self.side as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.ell() * self.ell()
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn center(&self, m: usize) -> Point {
        let (ix, iy) = (m % self.side, m / self.side);
        let ell = self.ell();
        [
            -self.half_width + (ix as f64 + 0.5) * ell,
            -self.half_width + (iy as f64 + 0.5) * ell,
        ]
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|m| self.center(m)).collect()
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0].abs() <= self.half_width && p[1].abs() <= self.half_width
    }
}

pub fn build_grid(half_width: f64, side: usize) -> Result<PixelGrid> {
    PixelGrid::new(half_width, side)
}

/// Shape family and size parameters, in local (unrotated, centered) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeKind {
    Disk { radius: f64 },
    Ellipse { semi_axes: [f64; 2] },
    /// `t -> (cos t + 0.65 cos 2t - 0.65, 1.5 sin t) * scale`.
    Kite { scale: f64 },
    Polygon { vertices: Vec<Point> },
}

/// A homogeneous scatterer: shape, placement and constant contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    #[serde(default)]
    pub center: Point,
    /// Counter-clockwise rotation in radians.
    #[serde(default)]
    pub rotation: f64,
    pub contrast: f64,
}

const KITE_POLYGON_POINTS: usize = 512;

impl ShapeSpec {
    pub fn disk(center: Point, radius: f64, contrast: f64) -> Self {
        Self {
            kind: ShapeKind::Disk { radius },
            center,
            rotation: 0.0,
            contrast,
        }
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2], rotation: f64, contrast: f64) -> Self {
        Self {
            kind: ShapeKind::Ellipse { semi_axes },
            center,
            rotation,
            contrast,
        }
    }

    pub fn kite(center: Point, scale: f64, rotation: f64, contrast: f64) -> Self {
        Self {
            kind: ShapeKind::Kite { scale },
            center,
            rotation,
            contrast,
        }
    }

    /// The pair of scatterers used in the reference experiments.
    pub fn default_scatterers() -> Vec<ShapeSpec> {
        vec![
            ShapeSpec::kite([-2.0, 1.5], 1.0, 0.0, 1.0),
            ShapeSpec::ellipse([2.0, -2.0], [1.5, 1.0], 0.0, 2.0),
        ]
    }

    fn validate_parameters(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Geometry(format!("invalid {what} in {:?}", self.kind)));
        if !(self.contrast > 0.0) || !self.contrast.is_finite() {
            return Err(Error::Geometry(format!(
                "contrast must be positive and finite, got {}",
                self.contrast
            )));
        }
        match &self.kind {
            ShapeKind::Disk { radius } if !(*radius > 0.0) => bad("radius"),
            ShapeKind::Ellipse { semi_axes } if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) => {
                bad("semi axes")
            }
            ShapeKind::Kite { scale } if !(*scale > 0.0) => bad("scale"),
            ShapeKind::Polygon { vertices } if vertices.len() < 3 => bad("vertex list"),
            _ => Ok(()),
        }
    }

    /// Checks parameters and that the boundary lies inside `[-half_width, half_width]^2`.
    pub fn validate(&self, half_width: f64) -> Result<()> {
        self.validate_parameters()?;
        let region = self.prepare()?;
        if let Some(p) = region
            .boundary_samples(256)
            .into_iter()
            .find(|p| p[0].abs() > half_width || p[1].abs() > half_width)
        {
            return Err(Error::Geometry(format!(
                "shape {:?} leaves the region of interest at ({:.3}, {:.3})",
                self.kind, p[0], p[1]
            )));
        }
        Ok(())
    }

    pub fn prepare(&self) -> Result<Region> {
        self.validate_parameters()?;
        let polygon = match &self.kind {
            ShapeKind::Kite { scale } => Some(
                (0..KITE_POLYGON_POINTS)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / KITE_POLYGON_POINTS as f64;
                        [
                            (t.cos() + 0.65 * (2.0 * t).cos() - 0.65) * scale,
                            1.5 * t.sin() * scale,
                        ]
                    })
                    .collect::<Vec<_>>(),
            ),
            ShapeKind::Polygon { vertices } => Some(vertices.clone()),
            _ => None,
        };
        let extent = match &self.kind {
            ShapeKind::Disk { radius } => *radius,
            ShapeKind::Ellipse { semi_axes } => semi_axes[0].max(semi_axes[1]),
            _ => polygon
                .as_ref()
                .map(|poly| poly.iter().fold(0.0_f64, |m, p| m.max(p[0].hypot(p[1]))))
                .unwrap_or(0.0),
        };
        Ok(Region {
            spec: self.clone(),
            polygon,
            cos: self.rotation.cos(),
            sin: self.rotation.sin(),
            extent,
        })
    }
}

/// A shape prepared for repeated point queries.
#[derive(Debug, Clone)]
pub struct Region {
    spec: ShapeSpec,
    polygon: Option<Vec<Point>>,
    cos: f64,
    sin: f64,
    extent: f64,
}

impl Region {
    pub fn contrast(&self) -> f64 {
        self.spec.contrast
    }

    fn to_local(&self, p: Point) -> Point {
        let dx = p[0] - self.spec.center[0];
        let dy = p[1] - self.spec.center[1];
        [self.cos * dx + self.sin * dy, -self.sin * dx + self.cos * dy]
    }

    fn to_global(&self, p: Point) -> Point {
        [
            self.spec.center[0] + self.cos * p[0] - self.sin * p[1],
            self.spec.center[1] + self.sin * p[0] + self.cos * p[1],
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        let q = self.to_local(p);
        if q[0].hypot(q[1]) > self.extent {
            return false;
        }
        match &self.spec.kind {
            ShapeKind::Disk { radius } => q[0] * q[0] + q[1] * q[1] <= radius * radius,
            ShapeKind::Ellipse { semi_axes } => {
                (q[0] / semi_axes[0]).powi(2) + (q[1] / semi_axes[1]).powi(2) <= 1.0
            }
            ShapeKind::Kite { .. } | ShapeKind::Polygon { .. } => {
                winding_number(self.polygon.as_deref().unwrap_or(&[]), q) != 0
            }
        }
    }

    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        match (&self.spec.kind, &self.polygon) {
            (_, Some(poly)) => poly.iter().map(|&p| self.to_global(p)).collect(),
            (ShapeKind::Disk { radius }, _) => (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    self.to_global([radius * t.cos(), radius * t.sin()])
                })
                .collect(),
            (ShapeKind::Ellipse { semi_axes }, _) => (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    self.to_global([semi_axes[0] * t.cos(), semi_axes[1] * t.sin()])
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Winding number of the closed polygon around `p`.
fn winding_number(poly: &[Point], p: Point) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Piecewise-constant non-negative coefficients on a pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastField {
    pub grid: PixelGrid,
    pub values: Vec<f64>,
}

impl ContrastField {
    pub fn new(grid: PixelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a grid of {} pixels",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input(format!("contrast coefficient {v} is not finite and >= 0")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PixelGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Indicator of a single pixel.
    pub fn pixel(grid: PixelGrid, m: usize, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.values[m] = value;
        f
    }

    pub fn scaled(&self, eps: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * eps).collect(),
        }
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0.0).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&m| self.values[m] > 0.0).collect()
    }
}

/// Rasterizes disjoint shapes by `subsamples x subsamples` point sampling per pixel.
pub fn rasterize(shapes: &[ShapeSpec], grid: &PixelGrid, subsamples: usize) -> Result<ContrastField> {
    if subsamples == 0 {
        return Err(Error::Input("subsamples must be >= 1".into()));
    }
    let regions = shapes.iter().map(ShapeSpec::prepare).collect::<Result<Vec<_>>>()?;
    let ell = grid.ell();
    let inv = 1.0 / (subsamples * subsamples) as f64;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let c = grid.center(m);
            let mut hits_per_region = vec![0usize; regions.len()];
            for sy in 0..subsamples {
                for sx in 0..subsamples {
                    let p = [
                        c[0] + ell * ((sx as f64 + 0.5) / subsamples as f64 - 0.5),
                        c[1] + ell * ((sy as f64 + 0.5) / subsamples as f64 - 0.5),
                    ];
                    let mut hits = (0..regions.len()).filter(|&r| regions[r].contains(p));
                    if let Some(r) = hits.next() {
                        if hits.next().is_some() {
                            return Err(Error::Geometry(format!(
                                "shapes overlap near ({:.4}, {:.4})",
                                p[0], p[1]
                            )));
                        }
                        hits_per_region[r] += 1;
                    }
                }
            }
            Ok(regions
                .iter()
                .zip(&hits_per_region)
                .map(|(r, &h)| r.contrast() * (h as f64 * inv))
                .sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    ContrastField::new(*grid, values)
}

/// Pixels whose center lies inside some shape.
pub fn true_support_mask(shapes: &[ShapeSpec], grid: &PixelGrid) -> Result<Vec<bool>> {
    let regions = shapes.iter().map(ShapeSpec::prepare).collect::<Result<Vec<_>>>()?;
    Ok(grid
        .centers()
        .into_iter()
        .map(|z| regions.iter().any(|r| r.contains(z)))
        .collect())
}
