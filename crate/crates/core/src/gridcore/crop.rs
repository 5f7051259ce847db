use std::f64::consts::FRAC_PI_2;

use super::grid::{CellCoord, OccupancyGrid, Pose, ScalarMap};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rotation `(cos, sin)` taking egocentric offsets (forward = +row) into the
/// world frame. Values within 1e-12 of -1, 0 or 1 are snapped so that
/// quarter-turn crops are exact.
fn frame_rotation(heading: f64) -> (f64, f64) {
    let phi = heading - FRAC_PI_2;
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-12 {
            r
        } else {
            v
        }
    };
    (snap(phi.cos()), snap(phi.sin()))
}

/// World cell (possibly out of any grid) sampled by egocentric output cell
/// `(row, col)` of an `out_size` crop centred on `pose`.
pub fn ego_to_world(pose: &Pose, out_size: usize, row: usize, col: usize) -> (i64, i64) {
    let (cos, sin) = frame_rotation(pose.heading);
    ego_to_world_with(pose, out_size, row, col, cos, sin)
}

#[inline]
fn ego_to_world_with(pose: &Pose, out_size: usize, row: usize, col: usize, cos: f64, sin: f64) -> (i64, i64) {
    let m = (out_size / 2) as f64;
    let dc = col as f64 - m;
    let dr = row as f64 - m;
    let wx = pose.x + dc * cos - dr * sin;
    let wy = pose.y + dc * sin + dr * cos;
    (wx.floor() as i64, wy.floor() as i64)
}

/// Continuous egocentric offset `(right, forward)` of a world cell center
/// relative to `pose`.
pub fn world_to_ego(pose: &Pose, cell: CellCoord) -> (f64, f64) {
    let (cos, sin) = frame_rotation(pose.heading);
    let (cx, cy) = cell.center();
    let (dx, dy) = (cx - pose.x, cy - pose.y);
    // Inverse rotation.
    (dx * cos + dy * sin, -dx * sin + dy * cos)
}

fn crop_with<T: Scalar>(
    width: usize,
    height: usize,
    sample: impl Fn(usize) -> T,
    pose: &Pose,
    out_size: usize,
    fill: T,
) -> Result<ScalarMap<T>> {
    if out_size.is_multiple_of(2) {
        return Err(Error::input(format!("crop size must be odd, got {out_size}")));
    }
    let (cos, sin) = frame_rotation(pose.heading);
    let mut values = Vec::with_capacity(out_size * out_size);
    for row in 0..out_size {
        for col in 0..out_size {
            let (wc, wr) = ego_to_world_with(pose, out_size, row, col, cos, sin);
            let v = if wc >= 0 && wr >= 0 && (wc as usize) < width && (wr as usize) < height {
                sample(wr as usize * width + wc as usize)
            } else {
                fill
            };
            values.push(v);
        }
    }
    ScalarMap::from_vec(out_size, out_size, values)
}

/// Egocentric crop: the pose's cell lands at the output center and the
/// heading points toward increasing output rows. Nearest-neighbour sampling;
/// samples outside the source take `fill`.
pub fn egocentric_crop<T: Scalar>(source: &ScalarMap<T>, pose: &Pose, out_size: usize, fill: T) -> Result<ScalarMap<T>> {
    let values = source.values();
    crop_with(source.width(), source.height(), |i| values[i], pose, out_size, fill)
}

/// Crop of an occupancy grid encoded with per-state values.
pub fn egocentric_crop_grid<T: Scalar>(
    grid: &OccupancyGrid,
    encode: impl Fn(super::grid::Cell) -> T,
    pose: &Pose,
    out_size: usize,
    fill: T,
) -> Result<ScalarMap<T>> {
    let cells = grid.cells();
    crop_with(grid.width(), grid.height(), |i| encode(cells[i]), pose, out_size, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn numbered(n: usize) -> ScalarMap<f64> {
        ScalarMap::from_vec(n, n, (0..n * n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn identity_when_facing_up_at_center() {
        let src = numbered(7);
        let pose = Pose::at_cell(CellCoord::new(3, 3), FRAC_PI_2);
        assert_eq!(egocentric_crop(&src, &pose, 7, -1.0).unwrap(), src);
    }

    #[test]
    fn even_size_rejected() {
        let src = numbered(5);
        let pose = Pose::at_cell(CellCoord::new(2, 2), 0.0);
        assert!(egocentric_crop(&src, &pose, 4, 0.0).is_err());
    }

    #[test]
    fn center_samples_own_cell_at_any_heading() {
        let src = numbered(9);
        for k in 0..16 {
            let pose = Pose::new(4.3, 5.8, k as f64 * 0.41 - 3.0);
            let out = egocentric_crop(&src, &pose, 5, -1.0).unwrap();
            assert_eq!(out.get(CellCoord::new(2, 2)), src.get(CellCoord::new(4, 5)));
        }
    }

    #[test]
    fn forward_maps_to_heading_direction() {
        // Facing east: the cell ahead of the agent is the cell one column right.
        let pose = Pose::at_cell(CellCoord::new(5, 5), 0.0);
        assert_eq!(ego_to_world(&pose, 11, 6, 5), (6, 5));
        let pose = Pose::at_cell(CellCoord::new(5, 5), PI / 2.0);
        assert_eq!(ego_to_world(&pose, 11, 6, 5), (5, 6));
        let (right, fwd) = world_to_ego(&Pose::at_cell(CellCoord::new(5, 5), 0.0), CellCoord::new(6, 5));
        assert!((right - 0.0).abs() < 1e-12 && (fwd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_takes_fill() {
        let src = numbered(3);
        let pose = Pose::at_cell(CellCoord::new(0, 0), FRAC_PI_2);
        let out = egocentric_crop(&src, &pose, 3, -7.0).unwrap();
        assert_eq!(out.get(CellCoord::new(0, 0)), -7.0);
        assert_eq!(out.get(CellCoord::new(1, 1)), 0.0);
    }
}
