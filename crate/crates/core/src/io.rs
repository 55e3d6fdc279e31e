//! On-disk artifacts: CSV grids, far-field CSV with a JSON sidecar, and a
//! hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::FarFieldMatrix;
use crate::geometry::{directions, PixelGrid};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

/// 17 significant digits, so the value round-trips exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x,y,value` rows in pixel order (x fastest, from the minimum corner).
pub fn grid_csv(grid: &PixelGrid, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != grid.len() {
        return Err(Error::Dimension(format!("{} values for {} pixels", values.len(), grid.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["x", "y", "value"]).map_err(io)?;
    for (m, v) in values.iter().enumerate() {
        let c = grid.center(m);
        w.write_record([format_float(c[0]), format_float(c[1]), format_float(*v)]).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads the `value` column of a grid CSV, checking the centers against `grid`.
pub fn read_grid_csv(path: &Path, grid: &PixelGrid) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut values = Vec::with_capacity(grid.len());
    for (m, rec) in r.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, y, v) = rec.map_err(|e| csv_error(path, e))?;
        if m >= grid.len() {
            return Err(Error::Input(format!("{}: more rows than pixels", path.display())));
        }
        let c = grid.center(m);
        if (x - c[0]).abs() > 1e-9 * grid.half_width || (y - c[1]).abs() > 1e-9 * grid.half_width {
            return Err(Error::Input(format!("{}: row {m} is not pixel center {c:?}", path.display())));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(Error::Input(format!(
            "{}: {} rows for {} pixels",
            path.display(),
            values.len(),
            grid.len()
        )));
    }
    Ok(values)
}

/// `row,col,re,im`, 0-based, row-major.
pub fn far_field_csv(f: &FarFieldMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["row", "col", "re", "im"]).map_err(io)?;
    for l in 0..f.n() {
        for m in 0..f.n() {
            let z = f.data[(l, m)];
            w.write_record([l.to_string(), m.to_string(), format_float(z.re), format_float(z.im)])
                .map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Metadata written next to a far-field CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldMeta {
    pub wave_number: f64,
    pub n_directions: usize,
    /// Grid the data were simulated on.
    pub grid: PixelGrid,
    pub subsamples: usize,
    pub seed: u64,
    pub noise_level: f64,
    pub rng: String,
    pub inverse_crime: bool,
}

/// Sidecar path: `far_field.csv` → `far_field.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn read_far_field(path: &Path) -> Result<(FarFieldMatrix, FarFieldMeta)> {
    let meta_path = sidecar_path(path);
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: FarFieldMeta = serde_json::from_str(&text)?;
    let n = meta.n_directions;
    let mut data = DMatrix::<Complex64>::zeros(n, n);
    let mut seen = DMatrix::<bool>::from_element(n, n, false);
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    for rec in r.deserialize::<(usize, usize, f64, f64)>() {
        let (l, m, re, im) = rec.map_err(|e| csv_error(path, e))?;
        if l >= n || m >= n || seen[(l, m)] {
            return Err(Error::Input(format!("{}: bad or repeated entry ({l}, {m})", path.display())));
        }
        seen[(l, m)] = true;
        data[(l, m)] = Complex64::new(re, im);
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::Input(format!("{}: missing entries for N = {n}", path.display())));
    }
    let f = FarFieldMatrix::new(meta.wave_number, directions(n)?, data)?;
    Ok((f, meta))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, file: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.file == file)
    }
}

/// Writes files into one directory and removes all of them unless committed.
pub struct ArtifactWriter {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<(String, String, u64)>,
    committed: bool,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        // Record first so a half-written file is also cleaned up.
        self.written.retain(|(n, _, _)| n != name);
        self.written.push((name.to_string(), sha256_hex(bytes), bytes.len() as u64));
        fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` over everything written so far and keeps the files.
    pub fn commit(mut self) -> Result<Manifest> {
        let mut files: Vec<ManifestEntry> = self
            .written
            .iter()
            .map(|(file, sha256, bytes)| ManifestEntry {
                file: file.clone(),
                sha256: sha256.clone(),
                bytes: *bytes,
            })
            .collect();
        files.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest { files };
        self.write_json("manifest.json", &manifest)?;
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (name, _, _) in &self.written {
            let _ = fs::remove_file(self.dir.join(name));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
