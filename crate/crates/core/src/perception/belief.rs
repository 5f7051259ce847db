use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::environment::WorldState;
use crate::error::Result;
use crate::gridcore::{raycast_visibility, Cell, CellCoord, OccupancyGrid, Pose};

/// Poses kept per observed agent.
pub const HISTORY_CAPACITY: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub cell: CellCoord,
    pub last_seen: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedAgent {
    pub pose: Pose,
    pub carrying: bool,
    pub last_seen: u64,
}

/// What one agent knows about the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentBelief {
    pub owner: usize,
    pub grid: OccupancyGrid,
    pub objects: BTreeMap<usize, ObservedObject>,
    pub agents: BTreeMap<usize, ObservedAgent>,
    /// Observed poses of other agents, newest last.
    pub history: BTreeMap<usize, VecDeque<Pose>>,
}

impl AgentBelief {
    pub fn new(owner: usize, width: usize, height: usize) -> Result<Self> {
        Ok(AgentBelief {
            owner,
            grid: OccupancyGrid::new(width, height, Cell::Unknown)?,
            objects: BTreeMap::new(),
            agents: BTreeMap::new(),
            history: BTreeMap::new(),
        })
    }

    pub fn for_world(owner: usize, world: &WorldState) -> Result<Self> {
        Self::new(owner, world.grid.width(), world.grid.height())
    }

    pub fn unknown_count(&self) -> usize {
        self.grid.count(Cell::Unknown)
    }
}

/// Cells an agent perceives this tick: the forward range sensor plus contact
/// sensing of its eight neighbours.
pub fn sense(world: &WorldState, agent_id: usize) -> Result<BTreeSet<CellCoord>> {
    let agent = &world.agents[agent_id];
    let mut seen = raycast_visibility(&world.grid, &agent.pose, world.spec.sensor_fov, world.spec.sensor_range)?;
    let c = agent.cell();
    for dr in -1..=1 {
        for dc in -1..=1 {
            if let Some(n) = c.offset(dc, dr).filter(|n| world.grid.contains(*n)) {
                seen.insert(n);
            }
        }
    }
    Ok(seen)
}

/// Copies ground truth for `visible` cells into the belief. Objects believed
/// at a visible cell that turns out empty are forgotten; everything outside
/// the visible set is left as it was.
pub fn integrate_observation(belief: &mut AgentBelief, visible: &BTreeSet<CellCoord>, world: &WorldState) {
    if visible.is_empty() {
        return;
    }
    for &c in visible {
        if belief.grid.contains(c) {
            belief.grid.set(c, world.grid.get(c));
        }
    }
    belief.objects.retain(|&id, obs| {
        if !visible.contains(&obs.cell) {
            return true;
        }
        world.objects.get(id).is_some_and(|o| o.on_ground() && o.cell == obs.cell)
    });
    for o in world.ground_objects() {
        if visible.contains(&o.cell) {
            belief.objects.insert(
                o.id,
                ObservedObject {
                    cell: o.cell,
                    last_seen: world.tick,
                },
            );
        }
    }
    for a in &world.agents {
        if a.id == belief.owner || !visible.contains(&a.cell()) {
            continue;
        }
        belief.agents.insert(
            a.id,
            ObservedAgent {
                pose: a.pose,
                carrying: a.is_carrying(),
                last_seen: world.tick,
            },
        );
        let ring = belief.history.entry(a.id).or_default();
        if ring.back().and_then(|p| p.cell()) != a.pose.cell() {
            if ring.len() == HISTORY_CAPACITY {
                ring.pop_front();
            }
            ring.push_back(a.pose);
        }
    }
}
