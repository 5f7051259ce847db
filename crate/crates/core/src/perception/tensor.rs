use serde::{Deserialize, Serialize};

use crate::environment::{AgentState, Task, WorldState};
use crate::error::{Error, Result};
use crate::gridcore::{distance_field, egocentric_crop, CellCoord, OccupancyGrid, ScalarMap};
use crate::scalar::Scalar;

use super::belief::AgentBelief;
use super::intention::{IntentionEncoding, IntentionVariant};

pub const ENV_FREE: f64 = 0.0;
pub const ENV_UNKNOWN: f64 = 0.5;
pub const ENV_OBSTACLE: f64 = 1.0;
pub const AGENT_SELF: f64 = 1.0;
pub const AGENT_SELF_CARRYING: f64 = 0.9;
pub const AGENT_OTHER: f64 = 0.6;
pub const AGENT_OTHER_CARRYING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorConfig {
    pub out_size: usize,
    /// Compute distance channels on the true map instead of the belief.
    #[serde(default)]
    pub ground_truth_distances: bool,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            out_size: 21,
            ground_truth_distances: false,
        }
    }
}

/// Channel-major `channels x size x size` stack.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTensor<T> {
    size: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> StateTensor<T> {
    pub fn zeros(channels: usize, size: usize) -> Self {
        StateTensor {
            size,
            channels,
            data: vec![T::zero(); channels * size * size],
        }
    }

    pub fn from_raw(channels: usize, size: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * size * size {
            return Err(Error::shape(format!("{channels}x{size}x{size}"), format!("{} values", data.len())));
        }
        Ok(StateTensor { size, channels, data })
    }

    pub fn from_maps(maps: &[ScalarMap<T>]) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(Error::input("state tensor needs at least one channel"));
        };
        let size = first.width();
        let mut data = Vec::with_capacity(maps.len() * size * size);
        for m in maps {
            if m.width() != size || m.height() != size {
                return Err(Error::shape(format!("{size}x{size}"), format!("{}x{}", m.width(), m.height())));
            }
            data.extend_from_slice(m.values());
        }
        Ok(StateTensor {
            size,
            channels: maps.len(),
            data,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn channel_slice(&self, k: usize) -> &[T] {
        let n = self.size * self.size;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn channel(&self, k: usize) -> ScalarMap<T> {
        ScalarMap::from_vec(self.size, self.size, self.channel_slice(k).to_vec()).expect("consistent size")
    }

    pub fn set_channel(&mut self, k: usize, map: &ScalarMap<T>) -> Result<()> {
        if map.width() != self.size || map.height() != self.size || k >= self.channels {
            return Err(Error::shape(
                format!("channel < {} of {}x{}", self.channels, self.size, self.size),
                format!("channel {k} of {}x{}", map.width(), map.height()),
            ));
        }
        let n = self.size * self.size;
        self.data[k * n..(k + 1) * n].copy_from_slice(map.values());
        Ok(())
    }

    /// Copy with channel `k` removed.
    pub fn without_channel(&self, k: usize) -> Self {
        let n = self.size * self.size;
        let mut data = Vec::with_capacity(self.data.len() - n);
        data.extend_from_slice(&self.data[..k * n]);
        data.extend_from_slice(&self.data[(k + 1) * n..]);
        StateTensor {
            size: self.size,
            channels: self.channels - 1,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> StateTensor<U> {
        StateTensor {
            size: self.size,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Human-readable channel names, in tensor order.
pub fn channel_names(task: Task, variant: IntentionVariant, team_size: usize) -> Vec<String> {
    let mut names = vec!["environment".to_string(), "agents".to_string()];
    if task == Task::Foraging {
        names.push("receptacle_distance".into());
    }
    names.push("self_distance".into());
    let k = variant.channels(team_size);
    match variant {
        IntentionVariant::Predicted { history: true } => {
            names.push("predicted".into());
            names.push("history".into());
        }
        _ if k == 1 => names.push(variant.tag().into()),
        _ => names.extend((0..k).map(|i| format!("{}_{i}", variant.tag()))),
    }
    names
}

fn normalized_distance<T: Scalar>(
    grid: &OccupancyGrid,
    sources: &[CellCoord],
    diagonal: f64,
) -> Result<ScalarMap<T>> {
    let field = distance_field::<f64>(grid, sources, true)?;
    let values = field
        .values()
        .iter()
        .map(|&d| T::lit(if d == f64::MAX { 1.0 } else { (d / diagonal).min(1.0) }))
        .collect();
    ScalarMap::from_vec(grid.width(), grid.height(), values)
}

/// Stacks the egocentric channels for `agent`: environment, agents,
/// receptacle distance (foraging only), self distance, then intention
/// channels. All values lie in [0, 1].
pub fn build_state_tensor<T: Scalar>(
    belief: &AgentBelief,
    agent: &AgentState,
    intention: &IntentionEncoding<T>,
    variant: IntentionVariant,
    team_size: usize,
    world: &WorldState,
    cfg: &TensorConfig,
) -> Result<StateTensor<T>> {
    let expected = variant.channels(team_size);
    if intention.channels() != expected {
        return Err(Error::shape(
            format!("{expected} intention channels"),
            format!("{}", intention.channels()),
        ));
    }
    let n = cfg.out_size;
    let pose = &agent.pose;
    let (w, h) = (belief.grid.width(), belief.grid.height());
    let mut maps = Vec::with_capacity(4 + expected);

    let mut env = belief.grid.to_scalar_map(T::lit(ENV_FREE), T::lit(ENV_OBSTACLE), T::lit(ENV_UNKNOWN));
    for o in belief.objects.values() {
        env.set(o.cell, T::one());
    }
    maps.push(egocentric_crop(&env, pose, n, T::one())?);

    let mut agents = ScalarMap::zeros(w, h)?;
    for a in belief.agents.values() {
        if let Some(c) = a.pose.cell().filter(|c| agents.contains(*c)) {
            let v = if a.carrying { AGENT_OTHER_CARRYING } else { AGENT_OTHER };
            agents.set(c, T::lit(v).max(agents.get(c)));
        }
    }
    let own = if agent.is_carrying() { AGENT_SELF_CARRYING } else { AGENT_SELF };
    agents.set(agent.cell(), T::lit(own));
    maps.push(egocentric_crop(&agents, pose, n, T::zero())?);

    let grid = if cfg.ground_truth_distances { &world.grid } else { &belief.grid };
    let diagonal = grid.diagonal();
    if world.spec.task == Task::Foraging {
        let Some(rec) = world.receptacle else {
            return Err(Error::input("foraging world has no receptacle"));
        };
        let d = normalized_distance::<T>(grid, &rec.cells(), diagonal)?;
        maps.push(egocentric_crop(&d, pose, n, T::one())?);
    }
    let d = normalized_distance::<T>(grid, &[agent.cell()], diagonal)?;
    maps.push(egocentric_crop(&d, pose, n, T::one())?);

    match intention {
        IntentionEncoding::Maps(ms) => {
            for m in ms {
                if m.width() != n || m.height() != n {
                    return Err(Error::shape(format!("{n}x{n}"), format!("{}x{}", m.width(), m.height())));
                }
                maps.push(m.clone());
            }
        }
        IntentionEncoding::Flat(vs) => {
            for &v in vs {
                let v = ((v + T::one()) / T::lit(2.0)).max(T::zero()).min(T::one());
                maps.push(ScalarMap::filled(n, n, v)?);
            }
        }
    }
    StateTensor::from_maps(&maps)
}
