use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::coordination::{run_episode, Controller, DecisionContext, TrajectoryRow};
use crate::environment::{generate_environment, RobotKind, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{write_pgm, write_ppm, Cell, CellCoord, ScalarMap};
use crate::learner::{argmax, ActionIndex, QValueMap};
use crate::perception::{channel_names, StateTensor};
use crate::predictor::IntentionSource;

use super::config::RunConfig;
use super::eval::PolicySet;

/// Pixels per grid cell in trajectory overlays.
pub const CELL_PX: usize = 4;

const FREE: [u8; 3] = [235, 235, 235];
const OBSTACLE: [u8; 3] = [40, 40, 40];
const RECEPTACLE: [u8; 3] = [160, 215, 160];
const OBJECT: [u8; 3] = [150, 150, 150];
const AGENT_COLORS: [[u8; 3]; 8] = [
    [220, 50, 47],
    [38, 139, 210],
    [133, 153, 0],
    [211, 54, 130],
    [181, 137, 0],
    [42, 161, 152],
    [108, 113, 196],
    [203, 75, 22],
];

/// RGB image stored top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct Rgb {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Rgb {
    fn filled(width: usize, height: usize, c: [u8; 3]) -> Self {
        Rgb {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    /// `y` grows upward, like grid rows.
    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let top = self.height - 1 - y;
            self.pixels[top * self.width + x] = c;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[(self.height - 1 - y) * self.width + x]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_ppm(self.width, self.height, &self.pixels, BufWriter::new(File::create(path)?))
    }
}

pub fn agent_color(id: usize) -> [u8; 3] {
    AGENT_COLORS[id % AGENT_COLORS.len()]
}

/// Layout with the initial objects and each agent's path drawn in its own
/// color. Poses are drawn as 2x2 dots at cell centers, joined by lines.
pub fn render_trajectory(world: &WorldState, rows: &[TrajectoryRow]) -> Result<Rgb> {
    let (w, h) = (world.grid.width(), world.grid.height());
    let mut img = Rgb::filled(w * CELL_PX, h * CELL_PX, FREE);
    let fill_cell = |img: &mut Rgb, c: CellCoord, color| {
        for dy in 0..CELL_PX {
            for dx in 0..CELL_PX {
                img.put(c.col * CELL_PX + dx, c.row * CELL_PX + dy, color);
            }
        }
    };
    for c in world.grid.coords() {
        if world.grid.get(c) == Cell::Obstacle {
            fill_cell(&mut img, c, OBSTACLE);
        } else if world.in_receptacle(c) {
            fill_cell(&mut img, c, RECEPTACLE);
        }
    }
    for o in &world.objects {
        fill_cell(&mut img, o.cell, OBJECT);
    }
    let n = world.agents.len();
    let mut last: Vec<Option<(i64, i64)>> = vec![None; n];
    for r in rows {
        if r.id >= n {
            return Err(Error::input(format!("trajectory row for agent {} but the team has {n}", r.id)));
        }
        if !(r.x >= 0.0 && r.y >= 0.0 && (r.x as usize) < w && (r.y as usize) < h) {
            return Err(Error::input(format!("trajectory pose ({}, {}) outside the layout", r.x, r.y)));
        }
        let p = ((r.x * CELL_PX as f64) as i64, (r.y * CELL_PX as f64) as i64);
        let color = agent_color(r.id);
        if let Some(q) = last[r.id] {
            draw_line(&mut img, q, p, color);
        }
        for (dx, dy) in [(-1, -1), (0, -1), (-1, 0), (0, 0)] {
            img.put((p.0 + dx) as usize, (p.1 + dy) as usize, color);
        }
        last[r.id] = Some(p);
    }
    Ok(img)
}

fn draw_line(img: &mut Rgb, a: (i64, i64), b: (i64, i64), color: [u8; 3]) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).max(1);
    for k in 0..=steps {
        let x = a.0 + (b.0 - a.0) * k / steps;
        let y = a.1 + (b.1 - a.1) * k / steps;
        img.put(x as usize, y as usize, color);
    }
}

/// Q-value channels side by side, min-max normalized over all channels to
/// gray, with the argmax cell in red.
pub fn render_q_map(q: &QValueMap<f32>) -> Result<(Rgb, ActionIndex)> {
    let best = argmax(q)?;
    let size = q.size();
    let data = q.data();
    let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = hi - lo;
    let mut img = Rgb::filled(size * q.channels(), size, [0, 0, 0]);
    for c in 0..q.channels() {
        for row in 0..size {
            for col in 0..size {
                let v = q.channel_slice(c)[row * size + col];
                let g = if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 };
                let px = if ActionIndex::new(c, row, col) == best { [255, 0, 0] } else { [g, g, g] };
                img.put(c * size + col, row, px);
            }
        }
    }
    Ok((img, best))
}

/// Writes `state_<k>.pgm` per channel and returns the file names.
pub fn write_state_channels(state: &StateTensor<f32>, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for k in 0..state.channels() {
        let name = format!("state_{k:02}.pgm");
        write_pgm(&state.channel(k), BufWriter::new(File::create(dir.join(&name))?))?;
        files.push(name);
    }
    Ok(files)
}

/// Captures the first decision state of agent 0 and stops the episode.
struct Capture<'a> {
    set: Option<&'a PolicySet>,
    state: Option<StateTensor<f32>>,
}

impl Controller for Capture<'_> {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex> {
        if ctx.agent == 0 && self.state.is_none() {
            self.state = Some(ctx.state.clone());
        }
        Ok(ActionIndex::new(0, ctx.state.size() / 2, ctx.state.size() / 2))
    }

    fn intention_source(&self) -> IntentionSource {
        IntentionSource::Predicted
    }

    fn predict(&mut self, kind: RobotKind, input: &StateTensor<f32>) -> Result<ScalarMap<f32>> {
        match self.set.and_then(|s| s.predictors.get(&kind)) {
            Some(net) => crate::predictor::predict_intention(net, input),
            None => ScalarMap::zeros(input.size(), input.size()),
        }
    }

    fn should_stop(&self) -> bool {
        self.state.is_some()
    }
}

/// Initial state tensor of agent 0 in the layout generated from `seed`.
pub fn initial_state(cfg: &RunConfig, seed: u64, set: Option<&PolicySet>) -> Result<StateTensor<f32>> {
    let mut world = generate_environment(&cfg.environment, cfg.team.kinds(), seed)?;
    let mut cap = Capture { set, state: None };
    run_episode(&mut world, &mut cap, &cfg.episode_config(0, Some(1)))?;
    cap.state.ok_or_else(|| Error::input("agent 0 never decided"))
}

#[derive(Serialize)]
struct RenderManifest<'a> {
    config: &'a RunConfig,
    seed: u64,
    channels: Vec<(String, String)>,
    trajectory: Option<String>,
    q_map: Option<String>,
    q_argmax: Option<ActionIndex>,
}

/// Renders the layout generated from `seed`: agent 0's initial state
/// channels, its Q-value map when `set` is given, and a trajectory overlay
/// when a trajectory CSV is given. Writes `render_meta.json` alongside.
pub fn render_all(
    cfg: &RunConfig,
    seed: u64,
    set: Option<&PolicySet>,
    trajectory: Option<&[TrajectoryRow]>,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let state = initial_state(cfg, seed, set)?;
    let files = write_state_channels(&state, out)?;
    let names = channel_names(cfg.environment.task, cfg.variant, cfg.team.len());
    let mut manifest = RenderManifest {
        config: cfg,
        seed,
        channels: files.into_iter().zip(names).collect(),
        trajectory: None,
        q_map: None,
        q_argmax: None,
    };
    if let Some(set) = set {
        let kind = cfg.team.kinds()[0];
        let q = set.policies[&kind].forward(&[&state])?.remove(0);
        let (img, best) = render_q_map(&q)?;
        img.save(&out.join("q_map.ppm"))?;
        manifest.q_map = Some("q_map.ppm".into());
        manifest.q_argmax = Some(best);
    }
    if let Some(rows) = trajectory {
        let world = generate_environment(&cfg.environment, cfg.team.kinds(), seed)?;
        render_trajectory(&world, rows)?.save(&out.join("trajectory.ppm"))?;
        manifest.trajectory = Some("trajectory.ppm".into());
    }
    fs::write(out.join("render_meta.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
