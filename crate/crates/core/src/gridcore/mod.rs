//! Grid geometry shared by every other module: occupancy grids, 8-connected
//! distance fields, ramp rasterization, egocentric crops and raycast
//! visibility.
//!
//! Coordinates: `col` grows to the right and `row` grows upward, so a pose
//! with heading `π/2` faces increasing rows. Images are written top row first,
//! i.e. highest `row` first.

mod crop;
mod distance;
mod grid;
mod pgm;
mod raster;
mod visibility;

pub use crop::{ego_to_world, egocentric_crop, egocentric_crop_grid, world_to_ego};
pub use distance::{distance_costs, distance_field, shortest_path, PathCost, NEIGHBOR_ORDER};
pub use grid::{Cell, CellCoord, OccupancyGrid, Pose, ScalarMap};
pub use pgm::{normalize_to_bytes, write_pgm, write_ppm};
pub use raster::{
    bresenham_line, rasterize_constant_path, rasterize_ramp_path, rasterize_ramp_path_into, RampSpec,
};
pub use visibility::raycast_visibility;
