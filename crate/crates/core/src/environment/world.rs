use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::gridcore::{CellCoord, OccupancyGrid, PathCost, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotKind {
    Lifting,
    Pushing,
    Throwing,
    Rescue,
}

impl RobotKind {
    pub const ALL: [RobotKind; 4] = [RobotKind::Lifting, RobotKind::Pushing, RobotKind::Throwing, RobotKind::Rescue];

    /// Channel 0 moves; channel 1, when present, moves then actuates.
    pub fn action_channels(self) -> usize {
        match self {
            RobotKind::Lifting | RobotKind::Throwing => 2,
            RobotKind::Pushing | RobotKind::Rescue => 1,
        }
    }

    pub fn letter(self) -> char {
        match self {
            RobotKind::Lifting => 'L',
            RobotKind::Pushing => 'P',
            RobotKind::Throwing => 'T',
            RobotKind::Rescue => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<RobotKind> {
        RobotKind::ALL.into_iter().find(|k| k.letter() == c.to_ascii_uppercase())
    }

    pub fn name(self) -> &'static str {
        match self {
            RobotKind::Lifting => "lifting",
            RobotKind::Pushing => "pushing",
            RobotKind::Throwing => "throwing",
            RobotKind::Rescue => "rescue",
        }
    }
}

impl fmt::Display for RobotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RobotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RobotKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s.len() == 1 && s.starts_with(k.letter())))
            .ok_or_else(|| Error::config(format!("unknown robot kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effector {
    Lift,
    Drop,
    Throw,
}

/// One selected action in global coordinates; the target may lie outside the
/// grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub channel: usize,
    pub col: i64,
    pub row: i64,
}

/// A committed multi-tick action: follow `path`, then optionally actuate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    /// Starts at the agent's cell when committed.
    pub path: Vec<CellCoord>,
    /// Index into `path` of the agent's current cell.
    pub progress: usize,
    pub effector: Option<Effector>,
}

impl Primitive {
    pub fn remaining(&self) -> &[CellCoord] {
        &self.path[self.progress..]
    }

    pub fn is_noop(&self) -> bool {
        self.path.len() == 1 && self.effector.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub kind: RobotKind,
    pub pose: Pose,
    /// Object id held by a lifting robot.
    pub carrying: Option<usize>,
    pub primitive: Option<Primitive>,
    pub distance_travelled: f64,
}

impl AgentState {
    pub fn cell(&self) -> CellCoord {
        self.pose.cell().expect("agent pose inside grid")
    }

    pub fn is_idle(&self) -> bool {
        self.primitive.is_none()
    }

    pub fn is_carrying(&self) -> bool {
        self.carrying.is_some()
    }
}

/// Objects occupy whole cells. A carried object tracks its carrier's cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: usize,
    pub cell: CellCoord,
    pub removed: bool,
    pub carried_by: Option<usize>,
}

impl ObjectState {
    /// Present in the world and resting on the floor.
    pub fn on_ground(&self) -> bool {
        !self.removed && self.carried_by.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receptacle {
    pub min: CellCoord,
    pub max: CellCoord,
}

impl Receptacle {
    pub fn contains(&self, c: CellCoord) -> bool {
        (self.min.col..=self.max.col).contains(&c.col) && (self.min.row..=self.max.row).contains(&c.row)
    }

    pub fn cells(&self) -> Vec<CellCoord> {
        let mut out = Vec::new();
        for row in self.min.row..=self.max.row {
            for col in self.min.col..=self.max.col {
                out.push(CellCoord::new(col, row));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    Success,
    ObstacleCollision,
    AgentCollision,
    DistanceShaping,
    DropOutside,
}

impl RewardKind {
    pub const SUCCESS: f64 = 1.0;
    pub const OBSTACLE_COLLISION: f64 = -0.25;
    pub const AGENT_COLLISION: f64 = -1.0;
    pub const DROP_OUTSIDE: f64 = -0.25;

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Success => "success",
            RewardKind::ObstacleCollision => "obstacle_collision",
            RewardKind::AgentCollision => "agent_collision",
            RewardKind::DistanceShaping => "distance_shaping",
            RewardKind::DropOutside => "drop_outside",
        }
    }

    pub fn from_name(s: &str) -> Option<RewardKind> {
        [
            RewardKind::Success,
            RewardKind::ObstacleCollision,
            RewardKind::AgentCollision,
            RewardKind::DistanceShaping,
            RewardKind::DropOutside,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub tick: u64,
    pub agent: usize,
    pub kind: RewardKind,
    pub magnitude: f64,
}

impl RewardEvent {
    pub(crate) fn fixed(tick: u64, agent: usize, kind: RewardKind) -> Self {
        let magnitude = match kind {
            RewardKind::Success => RewardKind::SUCCESS,
            RewardKind::ObstacleCollision => RewardKind::OBSTACLE_COLLISION,
            RewardKind::AgentCollision => RewardKind::AGENT_COLLISION,
            RewardKind::DropOutside => RewardKind::DROP_OUTSIDE,
            RewardKind::DistanceShaping => unreachable!("shaping magnitude is computed"),
        };
        RewardEvent {
            tick,
            agent,
            kind,
            magnitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub spec: EnvironmentSpec,
    pub grid: OccupancyGrid,
    pub agents: Vec<AgentState>,
    pub objects: Vec<ObjectState>,
    pub receptacle: Option<Receptacle>,
    pub tick: u64,
    /// Decisions taken since the last object removal.
    pub steps_since_progress: usize,
    /// Exact receptacle distances on the ground-truth grid (foraging only).
    #[serde(skip)]
    pub(crate) receptacle_costs: Option<Vec<Option<PathCost>>>,
}

impl WorldState {
    /// Assembles a world from parts, e.g. for scripted scenarios. Agent ids
    /// must equal their index and object ids likewise.
    pub fn new(
        spec: EnvironmentSpec,
        grid: OccupancyGrid,
        agents: Vec<AgentState>,
        objects: Vec<ObjectState>,
        receptacle: Option<Receptacle>,
    ) -> Result<Self> {
        if agents.iter().enumerate().any(|(i, a)| a.id != i) || objects.iter().enumerate().any(|(i, o)| o.id != i) {
            return Err(Error::input("agent and object ids must equal their index"));
        }
        if let Some(bad) = agents.iter().find(|a| !a.pose.cell().is_some_and(|c| grid.contains(c))) {
            return Err(Error::input(format!("agent {} outside grid", bad.id)));
        }
        let mut world = WorldState {
            spec,
            grid,
            agents,
            objects,
            receptacle,
            tick: 0,
            steps_since_progress: 0,
            receptacle_costs: None,
        };
        world.refresh_receptacle_costs();
        Ok(world)
    }

    pub fn agent(&self, id: usize) -> Option<&AgentState> {
        self.agents.get(id)
    }

    pub fn agent_at(&self, cell: CellCoord) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.cell() == cell)
    }

    pub fn object_on_ground_at(&self, cell: CellCoord) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.on_ground() && o.cell == cell)
    }

    pub fn ground_objects(&self) -> impl Iterator<Item = &ObjectState> {
        self.objects.iter().filter(|o| o.on_ground())
    }

    pub fn removed_count(&self) -> usize {
        self.objects.iter().filter(|o| o.removed).count()
    }

    pub fn in_receptacle(&self, cell: CellCoord) -> bool {
        self.receptacle.is_some_and(|r| r.contains(cell))
    }

    /// Ground-truth path distance to the receptacle, if any.
    pub fn receptacle_distance(&self, cell: CellCoord) -> Option<f64> {
        let costs = self.receptacle_costs.as_ref()?;
        costs[self.grid.index(cell)].map(|c| c.value())
    }

    /// Rebuilds cached distance data, e.g. after deserializing.
    pub fn refresh_receptacle_costs(&mut self) {
        self.receptacle_costs = self.receptacle.map(|r| {
            crate::gridcore::distance_costs(&self.grid, &r.cells(), false).expect("receptacle inside grid")
        });
    }
}
