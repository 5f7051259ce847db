use std::collections::HashMap;

use super::world::{Action, Effector, Primitive, RewardEvent, RewardKind, RobotKind, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{shortest_path, Cell, CellCoord, OccupancyGrid, PathCost, Pose};

/// Commits a new primitive for an idle agent. The path is planned on the
/// agent's own `belief` grid with unknown cells treated as traversable; an
/// unreachable target yields a one-tick no-op.
pub fn begin_primitive(
    world: &mut WorldState,
    agent_id: usize,
    action: Action,
    belief: &OccupancyGrid,
) -> Result<Primitive> {
    let agent = world
        .agents
        .get(agent_id)
        .ok_or_else(|| Error::input(format!("no agent with id {agent_id}")))?;
    if !agent.is_idle() {
        return Err(Error::input(format!("agent {agent_id} is still executing a primitive")));
    }
    if action.channel >= agent.kind.action_channels() {
        return Err(Error::input(format!(
            "{} robots have {} action channel(s), got channel {}",
            agent.kind,
            agent.kind.action_channels(),
            action.channel
        )));
    }
    let from = agent.cell();
    let path = if belief.contains_signed(action.col, action.row) {
        let target = CellCoord::new(action.col as usize, action.row as usize);
        shortest_path(belief, from, target, true).ok().flatten()
    } else {
        None
    };
    let primitive = match path {
        Some(path) => {
            let effector = match (action.channel, agent.kind) {
                (0, _) => None,
                (_, RobotKind::Lifting) if agent.is_carrying() => Some(Effector::Drop),
                (_, RobotKind::Lifting) => Some(Effector::Lift),
                (_, RobotKind::Throwing) => Some(Effector::Throw),
                _ => None,
            };
            Primitive {
                path,
                progress: 0,
                effector,
            }
        }
        None => Primitive {
            path: vec![from],
            progress: 0,
            effector: None,
        },
    };
    world.steps_since_progress += 1;
    world.agents[agent_id].primitive = Some(primitive.clone());
    Ok(primitive)
}

fn step_clips_obstacle(grid: &OccupancyGrid, from: CellCoord, to: CellCoord) -> bool {
    if grid.get(to) == Cell::Obstacle {
        return true;
    }
    if from.col != to.col && from.row != to.row {
        let a = CellCoord::new(to.col, from.row);
        let b = CellCoord::new(from.col, to.row);
        return grid.get(a) == Cell::Obstacle || grid.get(b) == Cell::Obstacle;
    }
    false
}

struct TickCtx {
    tick: u64,
    events: Vec<RewardEvent>,
    removed_any: bool,
}

impl TickCtx {
    fn fixed(&mut self, agent: usize, kind: RewardKind) {
        self.events.push(RewardEvent::fixed(self.tick, agent, kind));
    }
}

fn shape(world: &WorldState, ctx: &mut TickCtx, agent: usize, before: CellCoord, after: CellCoord) {
    if world.receptacle.is_none() {
        return;
    }
    if let (Some(d0), Some(d1)) = (world.receptacle_distance(before), world.receptacle_distance(after)) {
        ctx.events.push(RewardEvent {
            tick: ctx.tick,
            agent,
            kind: RewardKind::DistanceShaping,
            magnitude: world.spec.kappa * (d0 - d1),
        });
    }
}

/// Moves a floor object; removes it if it lands in the receptacle.
fn displace_object(world: &mut WorldState, ctx: &mut TickCtx, agent: usize, object: usize, dest: CellCoord) {
    let before = world.objects[object].cell;
    shape(world, ctx, agent, before, dest);
    world.objects[object].cell = dest;
    if world.in_receptacle(dest) {
        world.objects[object].removed = true;
        ctx.fixed(agent, RewardKind::Success);
        ctx.removed_any = true;
    }
}

fn nearest_ground_object(world: &WorldState, cell: CellCoord, radius: f64) -> Option<usize> {
    world
        .ground_objects()
        .map(|o| (cell.distance(o.cell), o.id))
        .filter(|(d, _)| *d <= radius + 1e-9)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

fn actuate(world: &mut WorldState, ctx: &mut TickCtx, i: usize, effector: Effector) {
    let cell = world.agents[i].cell();
    match effector {
        Effector::Lift => {
            if world.agents[i].is_carrying() {
                return;
            }
            if let Some(obj) = nearest_ground_object(world, cell, world.spec.effector_radius) {
                let before = world.objects[obj].cell;
                shape(world, ctx, i, before, cell);
                world.objects[obj].cell = cell;
                world.objects[obj].carried_by = Some(i);
                world.agents[i].carrying = Some(obj);
            }
        }
        Effector::Drop => {
            if let Some(obj) = world.agents[i].carrying.take() {
                world.objects[obj].carried_by = None;
                world.objects[obj].cell = cell;
                if world.in_receptacle(cell) {
                    world.objects[obj].removed = true;
                    ctx.fixed(i, RewardKind::Success);
                    ctx.removed_any = true;
                } else {
                    ctx.fixed(i, RewardKind::DropOutside);
                }
            }
        }
        Effector::Throw => {
            let Some(obj) = nearest_ground_object(world, cell, world.spec.effector_radius) else {
                return;
            };
            let start = world.objects[obj].cell;
            let (ox, oy) = start.center();
            let heading = world.agents[i].pose.heading;
            let (dx, dy) = (-heading.cos(), -heading.sin());
            let mut landing = None;
            for k in 1..=world.spec.throw_range {
                let (x, y) = (ox + k as f64 * dx, oy + k as f64 * dy);
                let (c, r) = (x.floor() as i64, y.floor() as i64);
                if !world.grid.contains_signed(c, r) {
                    break;
                }
                let here = CellCoord::new(c as usize, r as usize);
                if world.grid.get(here) == Cell::Obstacle {
                    break;
                }
                // Objects fly over robots and other objects.
                if here == start || world.agent_at(here).is_some() || world.object_on_ground_at(here).is_some() {
                    continue;
                }
                landing = Some(here);
                if world.in_receptacle(here) {
                    break;
                }
            }
            if let Some(dest) = landing {
                displace_object(world, ctx, i, obj, dest);
            }
        }
    }
}

/// Advances the world by one tick and returns the reward events it produced.
///
/// Every busy agent advances one path cell. Resolution order: obstacle hits,
/// object pushes, agent-agent conflicts (shared target, swap, moving into a
/// stationary agent), then moves are applied in id order, followed by
/// end-of-path actuation and rescue contacts.
pub fn tick(world: &mut WorldState) -> Vec<RewardEvent> {
    world.tick += 1;
    let mut ctx = TickCtx {
        tick: world.tick,
        events: Vec::new(),
        removed_any: false,
    };
    let n = world.agents.len();
    let cells: Vec<CellCoord> = world.agents.iter().map(|a| a.cell()).collect();
    let mut proposal: Vec<Option<CellCoord>> = world
        .agents
        .iter()
        .map(|a| a.primitive.as_ref().and_then(|p| p.path.get(p.progress + 1).copied()))
        .collect();
    let mut aborted = vec![false; n];

    for i in 0..n {
        if let Some(t) = proposal[i] {
            if step_clips_obstacle(&world.grid, cells[i], t) {
                ctx.fixed(i, RewardKind::ObstacleCollision);
                proposal[i] = None;
                aborted[i] = true;
            }
        }
    }

    // Pushes: an object in the way slides one cell along the step if the
    // destination is clear; otherwise the robot is blocked.
    let mut push: Vec<Option<(usize, CellCoord)>> = vec![None; n];
    for i in 0..n {
        let Some(t) = proposal[i] else { continue };
        let Some(obj) = world.object_on_ground_at(t).map(|o| o.id) else { continue };
        let dc = t.col as i64 - cells[i].col as i64;
        let dr = t.row as i64 - cells[i].row as i64;
        let dest = t.offset(dc, dr).filter(|d| world.grid.contains(*d));
        let clear = dest.is_some_and(|d| {
            world.grid.get(d) == Cell::Free
                && world.object_on_ground_at(d).is_none()
                && !cells.contains(&d)
                && !proposal.contains(&Some(d))
        });
        if clear {
            push[i] = Some((obj, dest.unwrap()));
        } else {
            proposal[i] = None;
            aborted[i] = true;
        }
    }
    let mut dest_count: HashMap<CellCoord, usize> = HashMap::new();
    for p in push.iter().flatten() {
        *dest_count.entry(p.1).or_default() += 1;
    }
    for i in 0..n {
        if push[i].is_some_and(|p| dest_count[&p.1] > 1) {
            push[i] = None;
            proposal[i] = None;
            aborted[i] = true;
        }
    }

    let collide = |ctx: &mut TickCtx, aborted: &mut [bool], i: usize| {
        ctx.fixed(i, RewardKind::AgentCollision);
        aborted[i] = true;
    };
    let mut target_count: HashMap<CellCoord, usize> = HashMap::new();
    for t in proposal.iter().flatten() {
        *target_count.entry(*t).or_default() += 1;
    }
    let mut cancelled = vec![false; n];
    for i in 0..n {
        if proposal[i].is_some_and(|t| target_count[&t] > 1) {
            cancelled[i] = true;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if proposal[i] == Some(cells[j]) && proposal[j] == Some(cells[i]) {
                cancelled[i] = true;
                cancelled[j] = true;
            }
        }
    }
    for i in 0..n {
        if cancelled[i] {
            collide(&mut ctx, &mut aborted, i);
            proposal[i] = None;
            push[i] = None;
        }
    }
    // Moving into an agent that stays put collides both; cancellations
    // cascade along chains of followers.
    loop {
        let mut changed = false;
        for i in 0..n {
            let Some(t) = proposal[i] else { continue };
            if let Some(j) = (0..n).find(|&j| j != i && cells[j] == t) {
                if proposal[j].is_none() {
                    collide(&mut ctx, &mut aborted, i);
                    collide(&mut ctx, &mut aborted, j);
                    proposal[i] = None;
                    push[i] = None;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    for i in 0..n {
        let Some(t) = proposal[i] else { continue };
        let from = cells[i];
        let heading = (t.row as f64 - from.row as f64).atan2(t.col as f64 - from.col as f64);
        let agent = &mut world.agents[i];
        agent.pose = Pose::at_cell(t, heading);
        agent.distance_travelled += PathCost::octile(from, t).value::<f64>();
        if let Some(p) = agent.primitive.as_mut() {
            p.progress += 1;
        }
        let carried = agent.carrying;
        if let Some((obj, dest)) = push[i] {
            displace_object(world, &mut ctx, i, obj, dest);
        }
        if let Some(obj) = carried {
            shape(world, &mut ctx, i, from, t);
            world.objects[obj].cell = t;
        }
    }

    for i in 0..n {
        if aborted[i] {
            world.agents[i].primitive = None;
            continue;
        }
        let done = world.agents[i]
            .primitive
            .as_ref()
            .is_some_and(|p| p.progress + 1 >= p.path.len());
        if done {
            let effector = world.agents[i].primitive.take().and_then(|p| p.effector);
            if let Some(e) = effector {
                actuate(world, &mut ctx, i, e);
            }
        }
    }

    for i in 0..n {
        if world.agents[i].kind != RobotKind::Rescue {
            continue;
        }
        let cell = world.agents[i].cell();
        let radius = world.spec.rescue_radius;
        let hits: Vec<usize> = world
            .ground_objects()
            .filter(|o| cell.distance(o.cell) <= radius + 1e-9)
            .map(|o| o.id)
            .collect();
        for obj in hits {
            world.objects[obj].removed = true;
            ctx.fixed(i, RewardKind::Success);
            ctx.removed_any = true;
        }
    }

    if ctx.removed_any {
        world.steps_since_progress = 0;
    }
    ctx.events
}

/// All objects removed, or too many decisions without progress.
pub fn is_episode_done(world: &WorldState) -> bool {
    world.objects.iter().all(|o| o.removed) || world.steps_since_progress >= world.spec.no_progress_limit
}
