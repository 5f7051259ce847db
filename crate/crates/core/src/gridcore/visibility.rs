use std::collections::BTreeSet;
use std::f64::consts::PI;

use super::grid::{normalize_angle, Cell, CellCoord, OccupancyGrid, Pose};
use crate::error::{Error, Result};

/// Angular slack for the field-of-view test.
const FOV_EPS: f64 = 1e-9;

/// Grid traversal (Amanatides–Woo) of the segment `(x0,y0) -> (x1,y1)`.
/// Calls `visit` for every cell the segment passes through, in order, until it
/// returns `false`.
fn traverse(x0: f64, y0: f64, x1: f64, y1: f64, mut visit: impl FnMut(i64, i64) -> bool) {
    let (mut cx, mut cy) = (x0.floor() as i64, y0.floor() as i64);
    let (ex, ey) = (x1.floor() as i64, y1.floor() as i64);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let step_x = if dx > 0.0 { 1 } else { -1 };
    let step_y = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - x0) / dx
    } else if dx < 0.0 {
        (cx as f64 - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - y0) / dy
    } else if dy < 0.0 {
        (cy as f64 - y0) / dy
    } else {
        f64::INFINITY
    };
    let max_steps = (ex - cx).abs() + (ey - cy).abs() + 2;
    for _ in 0..=max_steps {
        if !visit(cx, cy) || (cx == ex && cy == ey) {
            return;
        }
        if t_max_x < t_max_y {
            if t_max_x > 1.0 {
                return;
            }
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > 1.0 {
                return;
            }
            cy += step_y;
            t_max_y += t_delta_y;
        }
    }
}

fn in_sensor_cone(pose: &Pose, cell: CellCoord, half_fov: f64, range: f64) -> bool {
    let (cx, cy) = cell.center();
    let (dx, dy) = (cx - pose.x, cy - pose.y);
    let dist = dx.hypot(dy);
    if dist > range {
        return false;
    }
    if dist < 1e-12 || half_fov >= PI {
        return true;
    }
    normalize_angle(dy.atan2(dx) - pose.heading).abs() <= half_fov + FOV_EPS
}

/// True when the segment from the pose to `cell`'s center crosses no
/// obstacle before reaching `cell`.
fn center_line_clear(grid: &OccupancyGrid, pose: &Pose, cell: CellCoord) -> bool {
    let (tx, ty) = cell.center();
    let mut clear = true;
    traverse(pose.x, pose.y, tx, ty, |c, r| {
        if (c as usize, r as usize) == (cell.col, cell.row) {
            return false;
        }
        if !grid.contains_signed(c, r) || grid.get(CellCoord::new(c as usize, r as usize)) == Cell::Obstacle {
            clear = false;
            return false;
        }
        true
    });
    clear
}

/// Cells seen by a forward-facing planar range sensor.
///
/// Rays are cast from the pose toward points spaced half a cell apart along
/// the boundary of the square of half-width `range`. Each ray stops at the
/// first obstacle, which is itself reported. A cell is reported only if its
/// center is within `range`, within `fov / 2` of the heading, and the segment
/// to its own center is unobstructed.
pub fn raycast_visibility(grid: &OccupancyGrid, pose: &Pose, fov: f64, range: f64) -> Result<BTreeSet<CellCoord>> {
    if !(fov > 0.0 && fov <= 2.0 * PI + 1e-12) {
        return Err(Error::input(format!("field of view must lie in (0, 2π], got {fov}")));
    }
    if !(range > 0.0) {
        return Err(Error::input(format!("sensor range must be positive, got {range}")));
    }
    let half_fov = fov / 2.0;
    let mut seen = BTreeSet::new();
    if let Some(own) = pose.cell().filter(|c| grid.contains(*c)) {
        seen.insert(own);
    }

    let per_side = ((2.0 * range) / 0.5).ceil() as usize;
    let mut targets = Vec::with_capacity(per_side * 4);
    for i in 0..per_side {
        let t = -range + i as f64 * 0.5;
        targets.push((t, -range));
        targets.push((range, t));
        targets.push((-t, range));
        targets.push((-range, -t));
    }

    for (ox, oy) in targets {
        let dir = oy.atan2(ox);
        if half_fov < PI && normalize_angle(dir - pose.heading).abs() > half_fov + 0.5 / range.max(1.0) + FOV_EPS {
            continue;
        }
        traverse(pose.x, pose.y, pose.x + ox, pose.y + oy, |c, r| {
            if !grid.contains_signed(c, r) {
                return false;
            }
            let cell = CellCoord::new(c as usize, r as usize);
            if in_sensor_cone(pose, cell, half_fov, range) && center_line_clear(grid, pose, cell) {
                seen.insert(cell);
            }
            grid.get(cell) != Cell::Obstacle
        });
    }
    Ok(seen)
}
