use serde::{Deserialize, Serialize};

use super::distance::PathCost;
use super::grid::{CellCoord, ScalarMap};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Linear value ramp along a path: `max(start - arc / length, floor)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub start_value: f64,
    pub normalization_length: f64,
    pub floor_value: f64,
}

impl RampSpec {
    pub fn new(start_value: f64, normalization_length: f64, floor_value: f64) -> Result<Self> {
        if !(start_value > floor_value && floor_value >= 0.0) {
            return Err(Error::input(format!(
                "ramp needs start > floor >= 0, got start {start_value}, floor {floor_value}"
            )));
        }
        if !(normalization_length > 0.0) {
            return Err(Error::input("ramp normalization length must be positive"));
        }
        Ok(RampSpec {
            start_value,
            normalization_length,
            floor_value,
        })
    }

    /// Default ramp for a crop of `out_size` cells: start 1, floor 0.1,
    /// normalized by the crop diagonal.
    pub fn for_crop(out_size: usize) -> Self {
        RampSpec {
            start_value: 1.0,
            normalization_length: out_size as f64 * std::f64::consts::SQRT_2,
            floor_value: 0.1,
        }
    }

    pub fn value_at<T: Scalar>(&self, arc: PathCost) -> T {
        let v = T::lit(self.start_value) - arc.value::<T>() / T::lit(self.normalization_length);
        let floor = T::lit(self.floor_value);
        if v > floor {
            v
        } else {
            floor
        }
    }
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec::for_crop(21)
    }
}

fn check_path<T: Scalar>(canvas: &ScalarMap<T>, path: &[CellCoord]) -> Result<()> {
    if path.is_empty() {
        return Err(Error::input("cannot rasterize an empty path"));
    }
    if let Some(bad) = path.iter().find(|c| !canvas.contains(**c)) {
        return Err(Error::input(format!("path cell {bad} outside canvas")));
    }
    Ok(())
}

/// In-place variant of [`rasterize_ramp_path`].
pub fn rasterize_ramp_path_into<T: Scalar>(canvas: &mut ScalarMap<T>, path: &[CellCoord], ramp: &RampSpec) -> Result<()> {
    check_path(canvas, path)?;
    let mut arc = PathCost::ZERO;
    for (i, &cell) in path.iter().enumerate() {
        if i > 0 {
            arc = arc + PathCost::octile(path[i - 1], cell);
        }
        let v = ramp.value_at::<T>(arc);
        if v > canvas.get(cell) {
            canvas.set(cell, v);
        }
    }
    Ok(())
}

/// Writes a ramp along `path`; each touched cell keeps the maximum of its old
/// value and every ramp value written to it.
pub fn rasterize_ramp_path<T: Scalar>(canvas: &ScalarMap<T>, path: &[CellCoord], ramp: &RampSpec) -> Result<ScalarMap<T>> {
    let mut out = canvas.clone();
    rasterize_ramp_path_into(&mut out, path, ramp)?;
    Ok(out)
}

/// Writes `value` (max-combined) on every path cell.
pub fn rasterize_constant_path<T: Scalar>(canvas: &mut ScalarMap<T>, path: &[CellCoord], value: T) -> Result<()> {
    check_path(canvas, path)?;
    for &cell in path {
        if value > canvas.get(cell) {
            canvas.set(cell, value);
        }
    }
    Ok(())
}

/// Integer Bresenham segment from `a` to `b`, inclusive; consecutive cells are
/// 8-adjacent.
pub fn bresenham_line(a: CellCoord, b: CellCoord) -> Vec<CellCoord> {
    let (mut x, mut y) = (a.col as i64, a.row as i64);
    let (x1, y1) = (b.col as i64, b.row as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push(CellCoord::new(x as usize, y as usize));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}
