use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::environment::{begin_primitive, is_episode_done, tick, Action, RewardEvent, RewardKind, RobotKind, Task, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{ego_to_world, ScalarMap};
use crate::learner::{ActionIndex, Transition};
use crate::perception::{
    build_state_tensor, encode_intention, integrate_observation, sense, AgentBelief, IntentionEncoding,
    IntentionRecord, IntentionVariant, StateTensor, TensorConfig,
};
use crate::predictor::IntentionSource;

use super::channel::{broadcast_intention, ChannelModel, Comms};

/// Index of the first intention channel in the state tensor.
pub fn intention_slot(task: Task) -> usize {
    match task {
        Task::Foraging => 4,
        Task::SearchAndRescue => 3,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub variant: IntentionVariant,
    pub tensor: TensorConfig,
    pub channel: ChannelModel,
    /// Seed for message loss draws.
    pub channel_seed: u64,
    /// Stop after this many ticks.
    pub tick_budget: Option<u64>,
}

/// Everything a controller may look at when an agent decides.
pub struct DecisionContext<'a> {
    pub world: &'a WorldState,
    pub agent: usize,
    pub belief: &'a AgentBelief,
    /// Intentions reconstructed from the agent's mailbox.
    pub records: &'a [IntentionRecord],
    pub state: &'a StateTensor<f32>,
}

/// Decision maker for every agent of a team.
pub trait Controller {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex>;

    /// Receives each completed transition.
    fn record(&mut self, _kind: RobotKind, _transition: Transition<f32>) -> Result<()> {
        Ok(())
    }

    fn supports(&self, _kind: RobotKind) -> bool {
        true
    }

    fn intention_source(&self) -> IntentionSource {
        IntentionSource::Communicated
    }

    /// Predicted intention map for predictor-based variants.
    fn predict(&mut self, kind: RobotKind, _input: &StateTensor<f32>) -> Result<ScalarMap<f32>> {
        Err(Error::config(format!("no intention predictor for {kind} robots")))
    }

    /// Checked once per tick; lets a trainer end an episode early.
    fn should_stop(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub carrying: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub objects_removed: usize,
    pub num_objects: usize,
    pub ticks: u64,
    pub all_removed: bool,
    pub returns: Vec<f64>,
    pub decisions: Vec<u64>,
    pub distance: Vec<f64>,
    pub obstacle_collisions: usize,
    /// Counted per agent involved.
    pub agent_collisions: usize,
    pub drops_outside: usize,
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub oversized_messages: u64,
    #[serde(skip)]
    pub events: Vec<RewardEvent>,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryRow>,
}

struct Pending {
    state: Arc<StateTensor<f32>>,
    action: ActionIndex,
    reward: f64,
    intention_target: Option<Arc<ScalarMap<f32>>>,
}

fn history_records(belief: &AgentBelief) -> Vec<IntentionRecord> {
    belief
        .history
        .iter()
        .filter(|(_, ring)| !ring.is_empty())
        .map(|(&id, ring)| IntentionRecord {
            agent_id: id,
            pose: *ring.back().expect("nonempty"),
            waypoints: Vec::new(),
            history: ring.iter().copied().collect(),
        })
        .collect()
}

fn maps(enc: IntentionEncoding<f32>) -> Vec<ScalarMap<f32>> {
    match enc {
        IntentionEncoding::Maps(m) => m,
        IntentionEncoding::Flat(_) => unreachable!("spatial variant"),
    }
}

/// State tensor for one decision, plus the communicated ramp map used to
/// supervise predictors.
#[allow(clippy::type_complexity)]
fn assemble(
    world: &WorldState,
    id: usize,
    belief: &AgentBelief,
    records: &[IntentionRecord],
    cfg: &EpisodeConfig,
    controller: &mut impl Controller,
) -> Result<(StateTensor<f32>, Option<ScalarMap<f32>>)> {
    let agent = &world.agents[id];
    let team = world.agents.len();
    let out = cfg.tensor.out_size;
    let canvas = (world.grid.width(), world.grid.height());
    let encode = |recs: &[IntentionRecord], v| encode_intention::<f32>(recs, v, &agent.pose, out, canvas, team);
    let IntentionVariant::Predicted { history } = cfg.variant else {
        let enc = match cfg.variant {
            IntentionVariant::HistoryMap => encode(&history_records(belief), cfg.variant)?,
            v => encode(records, v)?,
        };
        let state = build_state_tensor(belief, agent, &enc, cfg.variant, team, world, &cfg.tensor)?;
        return Ok((state, None));
    };
    let target = maps(encode(records, IntentionVariant::RampPath)?).remove(0);
    let source = controller.intention_source();
    let mut channels = vec![match source {
        IntentionSource::Communicated => target.clone(),
        IntentionSource::Predicted => ScalarMap::zeros(out, out)?,
    }];
    if history {
        channels.extend(maps(encode(&history_records(belief), IntentionVariant::HistoryMap)?));
    }
    let enc = IntentionEncoding::Maps(channels);
    let mut state = build_state_tensor(belief, agent, &enc, cfg.variant, team, world, &cfg.tensor)?;
    if source == IntentionSource::Predicted {
        let slot = intention_slot(world.spec.task);
        let predicted = controller.predict(agent.kind, &state.without_channel(slot))?;
        state.set_channel(slot, &predicted)?;
    }
    Ok((state, Some(target)))
}

fn observe_all(world: &WorldState, beliefs: &mut [AgentBelief]) -> Result<()> {
    for (id, b) in beliefs.iter_mut().enumerate() {
        let seen = sense(world, id)?;
        integrate_observation(b, &seen, world);
    }
    Ok(())
}

fn log_poses(world: &WorldState, rows: &mut Vec<TrajectoryRow>) {
    rows.extend(world.agents.iter().map(|a| TrajectoryRow {
        tick: world.tick,
        id: a.id,
        x: a.pose.x,
        y: a.pose.y,
        heading: a.pose.heading,
        carrying: a.is_carrying(),
    }));
}

/// Runs one decentralized episode. Idle agents decide in id order at the
/// start of every tick, broadcast their new path, then the world advances.
pub fn run_episode(world: &mut WorldState, controller: &mut impl Controller, cfg: &EpisodeConfig) -> Result<EpisodeMetrics> {
    let n = world.agents.len();
    if let Some(a) = world.agents.iter().find(|a| !controller.supports(a.kind)) {
        return Err(Error::config(format!("no policy for {} robots", a.kind)));
    }
    let mut comms = Comms::new(n, cfg.channel, cfg.channel_seed)?;
    let mut beliefs = (0..n).map(|i| AgentBelief::for_world(i, world)).collect::<Result<Vec<_>>>()?;
    let mut pending: Vec<Option<Pending>> = (0..n).map(|_| None).collect();
    let mut metrics = EpisodeMetrics {
        num_objects: world.objects.len(),
        returns: vec![0.0; n],
        decisions: vec![0; n],
        ..EpisodeMetrics::default()
    };
    observe_all(world, &mut beliefs)?;
    log_poses(world, &mut metrics.trajectory);
    // Everyone announces where it stands so receivers start with a record.
    for a in &world.agents {
        comms.broadcast(a.id, vec![a.cell()], false, world.tick)?;
    }

    loop {
        comms.deliver_due(world.tick);
        if is_episode_done(world) || cfg.tick_budget.is_some_and(|b| world.tick >= b) || controller.should_stop() {
            break;
        }
        for id in 0..n {
            if !world.agents[id].is_idle() {
                continue;
            }
            let records = comms.intentions_for(id, world.tick);
            let (state, target) = assemble(world, id, &beliefs[id], &records, cfg, controller)?;
            let state = Arc::new(state);
            if let Some(p) = pending[id].take() {
                controller.record(
                    world.agents[id].kind,
                    Transition {
                        state: p.state,
                        action: p.action,
                        reward: p.reward,
                        next_state: state.clone(),
                        terminal: false,
                        intention_target: p.intention_target,
                    },
                )?;
            }
            let ctx = DecisionContext {
                world,
                agent: id,
                belief: &beliefs[id],
                records: &records,
                state: &state,
            };
            let choice = controller.act(&ctx)?;
            let (col, row) = ego_to_world(&world.agents[id].pose, cfg.tensor.out_size, choice.row, choice.col);
            let action = Action {
                channel: choice.channel,
                col,
                row,
            };
            let primitive = begin_primitive(world, id, action, &beliefs[id].grid)?;
            broadcast_intention(&mut comms, &world.agents[id], &primitive, world.tick)?;
            metrics.decisions[id] += 1;
            pending[id] = Some(Pending {
                state,
                action: choice,
                reward: 0.0,
                intention_target: target.map(Arc::new),
            });
        }

        let ends: Vec<_> = world
            .agents
            .iter()
            .map(|a| a.primitive.as_ref().and_then(|p| p.path.last().copied()))
            .collect();
        let events = tick(world);
        for e in &events {
            metrics.returns[e.agent] += e.magnitude;
            if let Some(p) = pending[e.agent].as_mut() {
                p.reward += e.magnitude;
            }
            match e.kind {
                RewardKind::ObstacleCollision => metrics.obstacle_collisions += 1,
                RewardKind::AgentCollision => metrics.agent_collisions += 1,
                RewardKind::DropOutside => metrics.drops_outside += 1,
                _ => {}
            }
        }
        // A primitive that stopped short of its end is re-announced as a
        // single cell so receivers do not extrapolate along a dead path.
        for a in &world.agents {
            if a.is_idle() && ends[a.id].is_some_and(|end| end != a.cell()) {
                comms.broadcast(a.id, vec![a.cell()], false, world.tick)?;
            }
        }
        metrics.events.extend(events);
        observe_all(world, &mut beliefs)?;
        log_poses(world, &mut metrics.trajectory);
    }

    let terminal = world.objects.iter().all(|o| o.removed);
    for id in 0..n {
        let Some(p) = pending[id].take() else { continue };
        let records = comms.intentions_for(id, world.tick);
        let (state, _) = assemble(world, id, &beliefs[id], &records, cfg, controller)?;
        controller.record(
            world.agents[id].kind,
            Transition {
                state: p.state,
                action: p.action,
                reward: p.reward,
                next_state: Arc::new(state),
                terminal,
                intention_target: p.intention_target,
            },
        )?;
    }
    metrics.objects_removed = world.removed_count();
    metrics.all_removed = terminal;
    metrics.ticks = world.tick;
    metrics.distance = world.agents.iter().map(|a| a.distance_travelled).collect();
    metrics.messages_sent = comms.messages_sent;
    metrics.bytes_sent = comms.bytes_sent;
    metrics.oversized_messages = comms.oversized;
    Ok(metrics)
}

pub fn write_trajectory<W: Write>(rows: &[TrajectoryRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|row| row.map_err(|e| Error::input(format!("bad trajectory row: {e}")))).collect()
}
