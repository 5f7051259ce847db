//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code path it checks.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use intentmap::environment::{
    begin_primitive, tick, Action, AgentState, EnvironmentSpec, Layout, ObjectState, Receptacle, RewardEvent, RobotKind,
    Task, WorldState,
};
use intentmap::gridcore::{Cell, CellCoord, OccupancyGrid, PathCost, Pose, RampSpec, ScalarMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, obstacle_p: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(w, h, Cell::Free).unwrap();
    for row in 0..h {
        for col in 0..w {
            if rng.gen_bool(obstacle_p) {
                g.set(CellCoord::new(col, row), Cell::Obstacle);
            }
        }
    }
    g
}

fn passable(g: &OccupancyGrid, col: i64, row: i64, tu: bool) -> bool {
    if col < 0 || row < 0 || col >= g.width() as i64 || row >= g.height() as i64 {
        return false;
    }
    match g.cells()[row as usize * g.width() + col as usize] {
        Cell::Free => true,
        Cell::Unknown => tu,
        Cell::Obstacle => false,
    }
}

/// Explicit directed edge list of the 8-connected graph without corner
/// cutting.
pub fn edge_list(g: &OccupancyGrid, tu: bool) -> Vec<(usize, usize, PathCost)> {
    let mut edges = Vec::new();
    let w = g.width() as i64;
    for row in 0..g.height() as i64 {
        for col in 0..w {
            if !passable(g, col, row, tu) {
                continue;
            }
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nc, nr) = (col + dc, row + dr);
                    if !passable(g, nc, nr, tu) {
                        continue;
                    }
                    let diagonal = dr != 0 && dc != 0;
                    if diagonal && !(passable(g, col + dc, row, tu) && passable(g, col, row + dr, tu)) {
                        continue;
                    }
                    let cost = if diagonal { PathCost::DIAGONAL } else { PathCost::AXIAL };
                    edges.push(((row * w + col) as usize, (nr * w + nc) as usize, cost));
                }
            }
        }
    }
    edges
}

/// Bellman–Ford relaxation over the explicit edge list, exact arithmetic.
pub fn brute_force_distances(g: &OccupancyGrid, source: CellCoord, tu: bool) -> Vec<Option<PathCost>> {
    let n = g.width() * g.height();
    let mut dist: Vec<Option<PathCost>> = vec![None; n];
    if passable(g, source.col as i64, source.row as i64, tu) {
        dist[source.row * g.width() + source.col] = Some(PathCost::ZERO);
    }
    let edges = edge_list(g, tu);
    loop {
        let mut changed = false;
        for &(a, b, c) in &edges {
            if let Some(da) = dist[a] {
                let cand = da + c;
                if dist[b].is_none_or(|db| cand < db) {
                    dist[b] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Per-cell ramp evaluator: for every cell, scans all occurrences in the
/// path, recomputes the prefix arc length from scratch, and keeps the
/// largest ramp value.
pub fn ramp_oracle(canvas: &ScalarMap<f64>, path: &[CellCoord], ramp: &RampSpec) -> ScalarMap<f64> {
    let mut out = canvas.clone();
    for row in 0..canvas.height() {
        for col in 0..canvas.width() {
            let cell = CellCoord::new(col, row);
            let mut best: Option<PathCost> = None;
            for i in 0..path.len() {
                if path[i] != cell {
                    continue;
                }
                let mut axial = 0;
                let mut diagonal = 0;
                for j in 1..=i {
                    let dc = path[j].col.abs_diff(path[j - 1].col) as u32;
                    let dr = path[j].row.abs_diff(path[j - 1].row) as u32;
                    diagonal += dc.min(dr);
                    axial += dc.max(dr) - dc.min(dr);
                }
                let arc = PathCost { axial, diagonal };
                if best.is_none_or(|b| arc < b) {
                    best = Some(arc);
                }
            }
            if let Some(arc) = best {
                let d = arc.axial as f64 + arc.diagonal as f64 * std::f64::consts::SQRT_2;
                let v = (ramp.start_value - d / ramp.normalization_length).max(ramp.floor_value);
                if v > out.get(cell) {
                    out.set(cell, v);
                }
            }
        }
    }
    out
}

/// Random 8-connected polyline built from straight runs.
pub fn random_polyline(rng: &mut impl Rng, w: usize, h: usize) -> Vec<CellCoord> {
    let mut cur = CellCoord::new(rng.gen_range(0..w), rng.gen_range(0..h));
    let mut path = vec![cur];
    for _ in 0..rng.gen_range(1..6) {
        let (dc, dr) = loop {
            let d = (rng.gen_range(-1..=1i64), rng.gen_range(-1..=1i64));
            if d != (0, 0) {
                break d;
            }
        };
        for _ in 0..rng.gen_range(1..10) {
            match cur.offset(dc, dr) {
                Some(n) if n.col < w && n.row < h => {
                    cur = n;
                    path.push(cur);
                }
                _ => break,
            }
        }
    }
    path
}

/// Quarter-turn counter-clockwise rotation of a square map as displayed
/// (rows up): the old right edge becomes the top edge.
pub fn rotate_ccw(map: &ScalarMap<f64>) -> ScalarMap<f64> {
    let n = map.width();
    let mut out = ScalarMap::zeros(n, n).unwrap();
    for row in 0..n {
        for col in 0..n {
            out.set(CellCoord::new(col, row), map.get(CellCoord::new(row, n - 1 - col)));
        }
    }
    out
}

fn cell_at(g: &OccupancyGrid, x: f64, y: f64) -> Option<(usize, usize)> {
    let (c, r) = (x.floor(), y.floor());
    (c >= 0.0 && r >= 0.0 && (c as usize) < g.width() && (r as usize) < g.height()).then_some((c as usize, r as usize))
}

/// Line of sight by sampling the center segment every 0.25 cells.
pub fn los_oracle(g: &OccupancyGrid, pose: &Pose, fov: f64, range: f64) -> BTreeSet<CellCoord> {
    let mut out = BTreeSet::new();
    for cell in g.coords() {
        if line_blocked(g, pose, cell) {
            continue;
        }
        let (cx, cy) = cell.center();
        let (dx, dy) = (cx - pose.x, cy - pose.y);
        let dist = dx.hypot(dy);
        if dist > range {
            continue;
        }
        if dist > 1e-12 && fov < 2.0 * PI {
            let mut diff = dy.atan2(dx) - pose.heading;
            while diff > PI {
                diff -= 2.0 * PI;
            }
            while diff < -PI {
                diff += 2.0 * PI;
            }
            if diff.abs() > fov / 2.0 + 1e-9 {
                continue;
            }
        }
        out.insert(cell);
    }
    out
}

/// True when some 0.25-step sample of the segment to `cell`'s center lies in
/// an obstacle other than `cell`.
pub fn line_blocked(g: &OccupancyGrid, pose: &Pose, cell: CellCoord) -> bool {
    let (cx, cy) = cell.center();
    let (dx, dy) = (cx - pose.x, cy - pose.y);
    let dist = dx.hypot(dy);
    let steps = (dist / 0.25).floor() as usize;
    for k in 0..=steps {
        let t = if dist > 0.0 { (k as f64 * 0.25) / dist } else { 0.0 };
        if let Some((c, r)) = cell_at(g, pose.x + dx * t, pose.y + dy * t) {
            if (c, r) != (cell.col, cell.row) && g.get(CellCoord::new(c, r)) == Cell::Obstacle {
                return true;
            }
        }
    }
    false
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Small f64 network for finite-difference checks.
pub fn probe_spec(input: usize, output: usize) -> intentmap::learner::NetworkSpec {
    use intentmap::learner::{BlockSpec, NetworkSpec};
    NetworkSpec {
        input_channels: input,
        output_channels: output,
        stem: 3,
        blocks: vec![
            BlockSpec { channels: 3, stride: 1 },
            BlockSpec { channels: 4, stride: 2 },
            BlockSpec { channels: 4, stride: 2 },
        ],
        head: [3, 3],
    }
}

pub fn random_state(rng: &mut impl Rng, channels: usize, size: usize) -> intentmap::perception::StateTensor<f64> {
    let data = (0..channels * size * size).map(|_| rng.gen_range(0.0..1.0)).collect();
    intentmap::perception::StateTensor::from_raw(channels, size, data).unwrap()
}

/// Central differences of `loss` with respect to `count` parameter entries
/// spread over every trainable tensor; returns (analytic, numeric) pairs.
pub fn finite_difference_pairs(
    net: &mut intentmap::learner::FcnNet<f64>,
    mut loss: impl FnMut(&mut intentmap::learner::FcnNet<f64>) -> f64,
    analytic: &[Vec<f64>],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<(f64, f64)> {
    let h = 1e-6;
    let trainable: Vec<usize> = net
        .params()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.trainable)
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for k in 0..count {
        let pi = trainable[k % trainable.len()];
        let len = net.params()[pi].value.len();
        let j = rng.gen_range(0..len);
        let orig = net.params()[pi].value[j];
        net.params_mut()[pi].value[j] = orig + h;
        let up = loss(net);
        net.params_mut()[pi].value[j] = orig - h;
        let down = loss(net);
        net.params_mut()[pi].value[j] = orig;
        out.push((analytic[pi][j], (up - down) / (2.0 * h)));
    }
    out
}

pub const ROOM: [&str; 12] = [
    "############",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#....#.....#",
    "#..........#",
    "#..........#",
    "############",
];

pub fn agent(id: usize, kind: RobotKind, col: usize, row: usize) -> AgentState {
    AgentState {
        id,
        kind,
        pose: Pose::at_cell(CellCoord::new(col, row), FRAC_PI_2),
        carrying: None,
        primitive: None,
        distance_travelled: 0.0,
    }
}

pub fn object(id: usize, col: usize, row: usize) -> ObjectState {
    ObjectState {
        id,
        cell: CellCoord::new(col, row),
        removed: false,
        carried_by: None,
    }
}

pub fn room(task: Task, agents: Vec<AgentState>, objects: Vec<ObjectState>) -> WorldState {
    let spec = EnvironmentSpec::mini(Layout::SmallEmpty, task, 10, 10, objects.len().max(1));
    let receptacle = (task == Task::Foraging).then(|| Receptacle {
        min: CellCoord::new(8, 8),
        max: CellCoord::new(10, 10),
    });
    WorldState::new(spec, OccupancyGrid::from_ascii(&ROOM).unwrap(), agents, objects, receptacle).unwrap()
}

/// Issues each scripted action once its agent is idle and ticks until
/// every script is exhausted and every agent is idle.
pub fn run_script(world: &mut WorldState, script: &[(usize, usize, i64, i64)], belief: Option<&OccupancyGrid>) -> Vec<RewardEvent> {
    let truth = world.grid.clone();
    let belief = belief.unwrap_or(&truth);
    let mut queues: Vec<Vec<Action>> = vec![Vec::new(); world.agents.len()];
    for &(id, channel, col, row) in script.iter().rev() {
        queues[id].push(Action { channel, col, row });
    }
    let mut events = Vec::new();
    for _ in 0..200 {
        for id in 0..world.agents.len() {
            if world.agents[id].is_idle() {
                if let Some(a) = queues[id].pop() {
                    begin_primitive(world, id, a, belief).unwrap();
                }
            }
        }
        if world.agents.iter().all(|a| a.is_idle()) {
            return events;
        }
        events.extend(tick(world));
    }
    panic!("script did not finish");
}
