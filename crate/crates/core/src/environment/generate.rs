use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{EnvironmentSpec, Layout};
use super::world::{AgentState, ObjectState, Receptacle, RobotKind, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{Cell, CellCoord, OccupancyGrid, Pose};

const MAX_ATTEMPTS: u64 = 200;

/// Which side of a partition a cell belongs to; `None` for the partition
/// itself and its openings.
type SideFn = Box<dyn Fn(CellCoord) -> Option<bool>>;

struct Built {
    grid: OccupancyGrid,
    side: Option<SideFn>,
}

fn walled(width: usize, height: usize) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(width + 2, height + 2, Cell::Free).expect("positive dims");
    for col in 0..width + 2 {
        g.set(CellCoord::new(col, 0), Cell::Obstacle);
        g.set(CellCoord::new(col, height + 1), Cell::Obstacle);
    }
    for row in 0..height + 2 {
        g.set(CellCoord::new(0, row), Cell::Obstacle);
        g.set(CellCoord::new(width + 1, row), Cell::Obstacle);
    }
    g
}

/// Distinct rows in `lo..=hi`, pairwise at least two apart.
fn spaced_rows(rng: &mut ChaCha8Rng, lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (lo..=hi).collect();
    candidates.shuffle(rng);
    let mut picked: Vec<usize> = Vec::new();
    for r in candidates {
        if picked.iter().all(|p| p.abs_diff(r) >= 2) {
            picked.push(r);
            if picked.len() == count {
                break;
            }
        }
    }
    picked.sort_unstable();
    picked
}

fn build_layout(spec: &EnvironmentSpec, rng: &mut ChaCha8Rng) -> Built {
    let dims = spec.interior();
    let (w, h) = (dims.width, dims.height);
    let mut grid = walled(w, h);
    // Interior columns are 1..=w and rows 1..=h.
    let mid_col = |rng: &mut ChaCha8Rng| {
        let jitter = (w / 10).max(1) as i64;
        (1 + w as i64 / 2 + rng.gen_range(-jitter..=jitter)).clamp(3, w as i64 - 4) as usize
    };
    let split_sides = |col: usize, thickness: usize| -> SideFn {
        Box::new(move |c: CellCoord| {
            if c.col < col {
                Some(false)
            } else if c.col >= col + thickness {
                Some(true)
            } else {
                None
            }
        })
    };
    match spec.layout {
        Layout::SmallEmpty | Layout::LargeEmpty => Built { grid, side: None },
        Layout::SmallDivider => {
            // Vertical divider leaving a one-cell opening at top and bottom.
            let col = mid_col(rng);
            for row in 2..h {
                grid.set(CellCoord::new(col, row), Cell::Obstacle);
            }
            Built {
                grid,
                side: Some(split_sides(col, 1)),
            }
        }
        Layout::LargeDoors => {
            let col = mid_col(rng);
            let doors = spaced_rows(rng, 1, h, 2);
            for row in 1..=h {
                if !doors.contains(&row) {
                    grid.set(CellCoord::new(col, row), Cell::Obstacle);
                }
            }
            Built {
                grid,
                side: Some(split_sides(col, 1)),
            }
        }
        Layout::LargeTunnels => {
            let col = mid_col(rng).min(w - 4);
            let thickness = 3;
            let tunnels = spaced_rows(rng, 2, h - 1, 2);
            for row in 1..=h {
                if tunnels.contains(&row) {
                    continue;
                }
                for c in col..col + thickness {
                    grid.set(CellCoord::new(c, row), Cell::Obstacle);
                }
            }
            Built {
                grid,
                side: Some(split_sides(col, thickness)),
            }
        }
        Layout::LargeRooms => {
            let col = mid_col(rng);
            let row = (1 + h / 2 + rng.gen_range(0..=1)).clamp(3, h - 3);
            for r in 1..=h {
                grid.set(CellCoord::new(col, r), Cell::Obstacle);
            }
            for c in 1..=w {
                grid.set(CellCoord::new(c, row), Cell::Obstacle);
            }
            // One door in each of the four wall segments.
            let doors = [
                CellCoord::new(col, rng.gen_range(1..row)),
                CellCoord::new(col, rng.gen_range(row + 1..=h)),
                CellCoord::new(rng.gen_range(1..col), row),
                CellCoord::new(rng.gen_range(col + 1..=w), row),
            ];
            for d in doors {
                grid.set(d, Cell::Free);
            }
            Built { grid, side: None }
        }
    }
}

fn reachable_from(grid: &OccupancyGrid, start: CellCoord) -> Vec<bool> {
    let dist = crate::gridcore::distance_costs(grid, &[start], false).expect("start inside grid");
    dist.into_iter().map(|d| d.is_some()).collect()
}

fn try_generate(spec: &EnvironmentSpec, team: &[RobotKind], rng: &mut ChaCha8Rng) -> Result<Option<WorldState>> {
    let built = build_layout(spec, rng);
    let grid = built.grid;
    let dims = spec.interior();
    let receptacle = spec.has_receptacle().then(|| Receptacle {
        min: CellCoord::new(dims.width - 2, dims.height - 2),
        max: CellCoord::new(dims.width, dims.height),
    });
    let in_receptacle = |c: CellCoord| receptacle.is_some_and(|r| r.contains(c));

    let free: Vec<CellCoord> = grid
        .coords()
        .filter(|&c| grid.get(c) == Cell::Free && !in_receptacle(c))
        .collect();
    let side_of = |c: CellCoord| built.side.as_ref().and_then(|f| f(c));
    let opposite = spec.layout.opposite_sides() && built.side.is_some();

    let mut object_cells: Vec<CellCoord> = free
        .iter()
        .copied()
        .filter(|&c| !opposite || side_of(c) == Some(false))
        .collect();
    let n_objects = spec.object_count();
    if object_cells.len() < n_objects {
        return Err(Error::Generation(format!(
            "{} free cells cannot hold {n_objects} objects",
            object_cells.len()
        )));
    }
    object_cells.shuffle(rng);
    object_cells.truncate(n_objects);

    // Robots keep a one-cell margin from every object.
    let mut robot_cells: Vec<CellCoord> = free
        .iter()
        .copied()
        .filter(|&c| !opposite || side_of(c) == Some(true))
        .filter(|&c| object_cells.iter().all(|o| o.col.abs_diff(c.col) > 1 || o.row.abs_diff(c.row) > 1))
        .collect();
    if robot_cells.len() < team.len() {
        return Err(Error::Generation(format!(
            "{} free cells cannot hold {} robots",
            robot_cells.len(),
            team.len()
        )));
    }
    robot_cells.shuffle(rng);
    robot_cells.truncate(team.len());

    for &start in &robot_cells {
        let reach = reachable_from(&grid, start);
        if object_cells.iter().any(|o| !reach[grid.index(*o)]) {
            return Ok(None);
        }
        if let Some(r) = receptacle {
            if !reach[grid.index(r.min)] {
                return Ok(None);
            }
        }
    }

    let agents = team
        .iter()
        .zip(&robot_cells)
        .enumerate()
        .map(|(id, (&kind, &cell))| AgentState {
            id,
            kind,
            pose: Pose::at_cell(cell, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
            carrying: None,
            primitive: None,
            distance_travelled: 0.0,
        })
        .collect();
    let objects = object_cells
        .into_iter()
        .enumerate()
        .map(|(id, cell)| ObjectState {
            id,
            cell,
            removed: false,
            carried_by: None,
        })
        .collect();
    let mut world = WorldState {
        spec: spec.clone(),
        grid,
        agents,
        objects,
        receptacle,
        tick: 0,
        steps_since_progress: 0,
        receptacle_costs: None,
    };
    world.refresh_receptacle_costs();
    Ok(Some(world))
}

/// Random layout, objects and robots for `team`, deterministic in
/// `(spec, team, seed)`. Retries with a new sub-seed until every object is
/// reachable from every robot.
pub fn generate_environment(spec: &EnvironmentSpec, team: &[RobotKind], seed: u64) -> Result<WorldState> {
    spec.validate()?;
    if team.is_empty() {
        return Err(Error::config("team must contain at least one robot"));
    }
    if team.len() > u8::MAX as usize {
        return Err(Error::config("at most 255 robots are supported"));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        if let Some(world) = try_generate(spec, team, &mut rng)? {
            return Ok(world);
        }
    }
    Err(Error::Generation(format!(
        "no connected layout after {MAX_ATTEMPTS} attempts"
    )))
}

/// Connected components of traversable cells, used by tests.
#[allow(dead_code)]
pub(crate) fn component_labels(grid: &OccupancyGrid) -> Vec<Option<usize>> {
    let mut labels = vec![None; grid.width() * grid.height()];
    let mut next = 0;
    for start in grid.coords() {
        if grid.get(start) != Cell::Free || labels[grid.index(start)].is_some() {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        labels[grid.index(start)] = Some(next);
        while let Some(c) = queue.pop_front() {
            for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = c.offset(dc, dr).filter(|n| grid.contains(*n)) {
                    if grid.get(n) == Cell::Free && labels[grid.index(n)].is_none() {
                        labels[grid.index(n)] = Some(next);
                        queue.push_back(n);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}
