//! Grid and table files.
//!
//! A momentum grid is stored as a headerless CSV matrix (one row per `ky`
//! sample, `kx` along the row) plus a JSON sidecar `<name>.json` carrying
//! axes, envelope and normalization. Numbers are written with 17 significant
//! digits so a read-back reproduces every bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::observables::{Axis, GridMeta, GridSpec, MomentumGrid, WannierEnvelope};

/// Formats a float with full round-trip precision.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub center: f64,
    pub step: f64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub layout: String,
    pub units: String,
    pub kx: AxisMeta,
    pub ky: AxisMeta,
    pub envelope_k_width: f64,
    pub envelope_amplitude: f64,
    pub n_particles: f64,
    pub reciprocal: [[f64; 2]; 3],
    pub directions: Vec<[f64; 2]>,
    pub clipped_cells: usize,
    pub warnings: Vec<String>,
}

impl GridSidecar {
    pub fn from_grid(grid: &MomentumGrid) -> Self {
        let s = grid.spec();
        let m = grid.meta();
        let ax = |a: &Axis| AxisMeta {
            center: a.center,
            step: a.step,
            len: a.len,
        };
        Self {
            layout: "rows = ky ascending, columns = kx ascending".into(),
            units: "k in 1/nm".into(),
            kx: ax(&s.kx),
            ky: ax(&s.ky),
            envelope_k_width: m.envelope.k_width(),
            envelope_amplitude: m.envelope.amplitude(),
            n_particles: m.n_particles,
            reciprocal: m.reciprocal.map(|g| [g.x, g.y]),
            directions: m.directions.iter().map(|d| [d.x, d.y]).collect(),
            clipped_cells: m.clipped,
            warnings: m.warnings.clone(),
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn bad_data(path: &Path, msg: impl Into<String>) -> Error {
    Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into()),
    )
}

/// Writes `<path>` (CSV) and its sidecar; returns both paths.
pub fn write_grid(path: &Path, grid: &MomentumGrid) -> Result<(PathBuf, PathBuf)> {
    let nx = grid.spec().kx.len;
    let mut out = String::with_capacity(grid.values().len() * 24);
    for row in grid.values().chunks(nx) {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&GridSidecar::from_grid(grid)).expect("sidecar serializes");
    fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok((path.to_path_buf(), side))
}

/// Reads a grid written by [`write_grid`].
pub fn read_grid(path: &Path) -> Result<MomentumGrid> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: GridSidecar =
        serde_json::from_str(&text).map_err(|e| bad_data(&side, format!("malformed sidecar: {e}")))?;
    let spec = GridSpec {
        kx: Axis::new(meta.kx.center, meta.kx.step, meta.kx.len).map_err(|e| bad_data(&side, e.to_string()))?,
        ky: Axis::new(meta.ky.center, meta.ky.step, meta.ky.len).map_err(|e| bad_data(&side, e.to_string()))?,
    };
    let csv = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(spec.len());
    for (i, line) in csv.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let before = values.len();
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| bad_data(path, format!("line {}: '{cell}' is not a number", i + 1)))?;
            values.push(v);
        }
        if values.len() - before != spec.kx.len {
            return Err(bad_data(
                path,
                format!("line {} has {} columns, expected {}", i + 1, values.len() - before, spec.kx.len),
            ));
        }
    }
    if values.len() != spec.len() {
        return Err(bad_data(
            path,
            format!("expected {} rows, found {}", spec.ky.len, values.len() / spec.kx.len),
        ));
    }
    let envelope = WannierEnvelope::new(meta.envelope_k_width, meta.envelope_amplitude)
        .map_err(|e| bad_data(&side, e.to_string()))?;
    let gm = GridMeta {
        envelope,
        n_particles: meta.n_particles,
        reciprocal: meta.reciprocal.map(|g| Vec2::new(g[0], g[1])),
        directions: meta.directions.iter().map(|d| Vec2::new(d[0], d[1])).collect(),
        clipped: meta.clipped_cells,
        warnings: meta.warnings,
    };
    MomentumGrid::from_values(spec, values, gm).map_err(|e| bad_data(path, e.to_string()))
}

/// 8-bit binary PGM, linearly scaled to the grid maximum, `ky` increasing
/// upward.
pub fn write_pgm(path: &Path, grid: &MomentumGrid) -> Result<()> {
    let (nx, ny) = (grid.spec().kx.len, grid.spec().ky.len);
    let max = grid.max_value();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            bytes.push((grid.at(ix, iy) * scale).round().clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a CSV table with a header line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a table written by [`write_table`]: header names and numeric rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad_data(path, "empty table"))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let r: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let r = r.map_err(|_| bad_data(path, format!("row {} is not numeric", i + 1)))?;
        if r.len() != header.len() {
            return Err(bad_data(path, format!("row {} has {} columns", i + 1, r.len())));
        }
        rows.push(r);
    }
    Ok((header, rows))
}
