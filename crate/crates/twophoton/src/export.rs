//! CSV tables and 8-bit portable graymaps.
//!
//! Pattern files have columns `position_m,value`; joint files have
//! `x_m,y_m,value` in row-major order (`x` is the row coordinate).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use twophoton_core::framepipe::FrameCounters;
use twophoton_core::patterns::{FringePattern1D, JointPattern2D};
use twophoton_core::{DMatrix, SpatialGrid};

use crate::error::{AppError, Result};

pub fn write_pattern_csv(path: &Path, p: &FringePattern1D) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["position_m", "value"])?;
    for (x, v) in p.grid().iter().zip(p.values()) {
        w.write_record([x.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

/// Reads a pattern file back; the positions must be evenly spaced.
pub fn read_pattern_csv(path: &Path) -> Result<FringePattern1D> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| {
                AppError::Config(format!("{}: malformed row {:?}", path.display(), rec))
            })
        };
        xs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    let (first, last) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if xs.len() >= 2 => (a, b),
        _ => {
            return Err(AppError::Config(format!(
                "{}: needs at least two rows",
                path.display()
            )))
        }
    };
    let grid = SpatialGrid::new(first, last, xs.len())?;
    Ok(FringePattern1D::new(grid, vs, None)?)
}

pub fn write_joint_csv(path: &Path, p: &JointPattern2D) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x_m", "y_m", "value"])?;
    let xs: Vec<f64> = p.grid().iter().collect();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            w.write_record([x.to_string(), y.to_string(), p.at(i, j).to_string()])?;
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, grid: &SpatialGrid, counts: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["position_m", "count"])?;
    for (x, c) in grid.iter().zip(counts) {
        w.write_record([x.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

pub fn write_counters_csv(path: &Path, c: &FrameCounters) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["counter", "frames"])?;
    for (name, v) in [
        ("total", c.total),
        ("empty", c.empty),
        ("single", c.single),
        ("pair", c.pair),
        ("rejected_pair", c.rejected),
        ("multi", c.multi),
    ] {
        w.write_record([name.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

/// One fitted visibility: dataset id, V, phase, offset, residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub id: String,
    pub visibility: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual: f64,
}

pub fn write_fits_csv(path: &Path, rows: &[FitRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "visibility", "phase_rad", "offset", "residual"])?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.visibility.to_string(),
            r.phase.to_string(),
            r.offset.to_string(),
            r.residual.to_string(),
        ])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

/// Binary PGM (P5), values mapped linearly from `[min, max]` to `[0, 255]`.
/// Matrix row `i` becomes image row `i`.
pub fn write_pgm(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let (lo, hi) = (m.min(), m.max());
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut bytes = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.push(((m[(i, j)] - lo) * scale).round().clamp(0.0, 255.0) as u8);
        }
    }
    write!(w, "P5\n{} {}\n255\n", m.ncols(), m.nrows()).map_err(|e| AppError::io(path, e))?;
    w.write_all(&bytes).map_err(|e| AppError::io(path, e))?;
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}
