use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{AgentState, Primitive, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{CellCoord, Pose};
use crate::perception::IntentionRecord;

use super::message::IntentionMessage;

/// Loss and latency applied to every point-to-point delivery.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub drop_probability: f64,
    /// Ticks between send and delivery.
    pub delay: u64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::config(format!("drop probability {} outside [0, 1]", self.drop_probability)));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.drop_probability == 0.0 && self.delay == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredMessage {
    pub message: IntentionMessage,
    pub sent_tick: u64,
}

/// Latest message per sender.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mailbox {
    latest: BTreeMap<usize, StoredMessage>,
}

impl Mailbox {
    /// Stores `message` unless one with an equal or higher seq is held.
    pub fn deliver(&mut self, message: IntentionMessage, sent_tick: u64) -> bool {
        if self.latest.get(&message.agent_id).is_some_and(|s| s.message.seq >= message.seq) {
            return false;
        }
        self.latest.insert(message.agent_id, StoredMessage { message, sent_tick });
        true
    }

    pub fn get(&self, sender: usize) -> Option<&StoredMessage> {
        self.latest.get(&sender)
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredMessage> {
        self.latest.values()
    }
}

/// Each sender's stored path with the cells it has already traversed
/// removed, assuming one cell per tick since sending.
pub fn intentions_for(decider: usize, mailbox: &Mailbox, world_tick: u64) -> Vec<IntentionRecord> {
    mailbox
        .iter()
        .filter(|s| s.message.agent_id != decider)
        .map(|s| {
            let w = &s.message.waypoints;
            let elapsed = world_tick.saturating_sub(s.sent_tick) as usize;
            let waypoints = w[elapsed.min(w.len() - 1)..].to_vec();
            IntentionRecord {
                agent_id: s.message.agent_id,
                pose: Pose::at_cell(waypoints[0], 0.0),
                waypoints,
                history: Vec::new(),
            }
        })
        .collect()
}

/// The same records built from the agents' actual in-flight primitives.
pub fn ground_truth_records(world: &WorldState, decider: usize) -> Vec<IntentionRecord> {
    world
        .agents
        .iter()
        .filter(|a| a.id != decider)
        .map(|a| IntentionRecord {
            agent_id: a.id,
            pose: a.pose,
            waypoints: a.primitive.as_ref().map_or_else(|| vec![a.cell()], |p| p.remaining().to_vec()),
            history: Vec::new(),
        })
        .collect()
}

#[derive(Clone, Debug)]
struct InFlight {
    due: u64,
    to: usize,
    message: IntentionMessage,
    sent_tick: u64,
}

/// Broadcast medium shared by a team: per-agent mailboxes, sequence
/// counters and messages still in transit.
#[derive(Clone, Debug)]
pub struct Comms {
    model: ChannelModel,
    rng: ChaCha8Rng,
    mailboxes: Vec<Mailbox>,
    next_seq: Vec<u32>,
    in_flight: Vec<InFlight>,
    pub bytes_sent: u64,
    pub messages_sent: u64,
    /// Messages larger than `8 * waypoints + 16` bytes.
    pub oversized: u64,
}

impl Comms {
    pub fn new(agents: usize, model: ChannelModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Comms {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mailboxes: vec![Mailbox::default(); agents],
            next_seq: vec![1; agents],
            in_flight: Vec::new(),
            bytes_sent: 0,
            messages_sent: 0,
            oversized: 0,
        })
    }

    pub fn mailbox(&self, agent: usize) -> &Mailbox {
        &self.mailboxes[agent]
    }

    /// Sends `waypoints` from `sender` to every other agent.
    pub fn broadcast(&mut self, sender: usize, waypoints: Vec<CellCoord>, effector: bool, tick: u64) -> Result<IntentionMessage> {
        let message = IntentionMessage {
            agent_id: sender,
            seq: self.next_seq[sender],
            waypoints,
            effector,
        };
        message.validate()?;
        let size = message.encode()?.len();
        self.next_seq[sender] += 1;
        self.messages_sent += 1;
        self.bytes_sent += size as u64;
        if size > 8 * message.waypoints.len() + 16 {
            self.oversized += 1;
        }
        for to in 0..self.mailboxes.len() {
            if to == sender {
                continue;
            }
            if self.model.drop_probability > 0.0 && self.rng.gen::<f64>() < self.model.drop_probability {
                continue;
            }
            if self.model.delay == 0 {
                self.mailboxes[to].deliver(message.clone(), tick);
            } else {
                self.in_flight.push(InFlight {
                    due: tick + self.model.delay,
                    to,
                    message: message.clone(),
                    sent_tick: tick,
                });
            }
        }
        Ok(message)
    }

    /// Delivers every delayed message due at or before `tick`, in send order.
    pub fn deliver_due(&mut self, tick: u64) {
        let (due, rest): (Vec<_>, Vec<_>) = self.in_flight.drain(..).partition(|m| m.due <= tick);
        self.in_flight = rest;
        for m in due {
            self.mailboxes[m.to].deliver(m.message, m.sent_tick);
        }
    }

    pub fn intentions_for(&self, decider: usize, tick: u64) -> Vec<IntentionRecord> {
        intentions_for(decider, &self.mailboxes[decider], tick)
    }
}

/// Announces a freshly committed primitive.
pub fn broadcast_intention(
    comms: &mut Comms,
    sender: &AgentState,
    primitive: &Primitive,
    tick: u64,
) -> Result<IntentionMessage> {
    comms.broadcast(sender.id, primitive.remaining().to_vec(), primitive.effector.is_some(), tick)
}
