use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coordination::{intention_slot, ChannelModel, EpisodeConfig};
use crate::environment::{EnvironmentSpec, Layout, RobotKind, Task};
use crate::error::{Error, Result};
use crate::learner::{NetworkSpec, Scale, TrainConfig};
use crate::perception::{IntentionVariant, TensorConfig};

/// Robot kinds in id order, written like `4L` or `2L+2P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Team(pub Vec<RobotKind>);

impl Team {
    pub fn kinds(&self) -> &[RobotKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct kinds in first-appearance order.
    pub fn distinct(&self) -> Vec<RobotKind> {
        let mut out: Vec<RobotKind> = Vec::new();
        for &k in &self.0 {
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    pub fn validate_for(&self, task: Task) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config("team is empty"));
        }
        let rescue = self.0.iter().filter(|&&k| k == RobotKind::Rescue).count();
        match task {
            Task::Foraging if rescue > 0 => Err(Error::config("rescue robots only take part in search and rescue")),
            Task::SearchAndRescue if rescue != self.0.len() => {
                Err(Error::config("search and rescue teams consist of rescue robots"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut groups: Vec<(usize, RobotKind)> = Vec::new();
        for &k in &self.0 {
            match groups.last_mut() {
                Some((n, last)) if *last == k => *n += 1,
                _ => groups.push((1, k)),
            }
        }
        let parts: Vec<String> = groups.iter().map(|(n, k)| format!("{n}{}", k.letter())).collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for Team {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kinds = Vec::new();
        for part in s.split('+').map(str::trim) {
            let split = part.find(|c: char| !c.is_ascii_digit()).unwrap_or(part.len());
            let (count, letter) = part.split_at(split);
            let count: usize = if count.is_empty() { 1 } else { count.parse().map_err(|_| Error::config(format!("bad team part {part:?}")))? };
            let mut chars = letter.chars();
            let kind = match (chars.next(), chars.next()) {
                (Some(c), None) => RobotKind::from_letter(c),
                _ => None,
            }
            .ok_or_else(|| Error::config(format!("bad team part {part:?} in {s:?}")))?;
            kinds.extend(std::iter::repeat_n(kind, count));
        }
        if kinds.is_empty() {
            return Err(Error::config("team is empty"));
        }
        Ok(Team(kinds))
    }
}

impl Serialize for Team {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Team {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_team() -> Team {
    Team(vec![RobotKind::Lifting; 4])
}

fn default_environment() -> EnvironmentSpec {
    EnvironmentSpec::new(Layout::SmallEmpty, Task::Foraging)
}

fn default_eval_seeds() -> Vec<u64> {
    (0..20).collect()
}

fn default_eval_tick_budget() -> u64 {
    1000
}

/// Everything needed to train or evaluate one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentSpec,
    pub team: Team,
    pub variant: IntentionVariant,
    pub scale: Scale,
    pub train: TrainConfig,
    pub tensor: TensorConfig,
    pub channel: ChannelModel,
    /// Training seed; drawn from entropy and recorded when absent.
    pub seed: Option<u64>,
    pub eval_seeds: Vec<u64>,
    pub eval_tick_budget: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            environment: default_environment(),
            team: default_team(),
            variant: IntentionVariant::RampPath,
            scale: Scale::Desk,
            train: TrainConfig::default(),
            tensor: TensorConfig::default(),
            channel: ChannelModel::default(),
            seed: None,
            eval_seeds: default_eval_seeds(),
            eval_tick_budget: default_eval_tick_budget(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate().map_err(|e| Error::config(e.to_string()))?;
        self.team.validate_for(self.environment.task)?;
        self.train.validate()?;
        self.channel.validate()?;
        if self.tensor.out_size.is_multiple_of(2) || self.tensor.out_size < 5 {
            return Err(Error::config("crop size must be odd and at least 5"));
        }
        if self.eval_seeds.is_empty() || self.eval_tick_budget == 0 {
            return Err(Error::config("evaluation needs seeds and a positive tick budget"));
        }
        Ok(())
    }

    pub fn base_channels(&self) -> usize {
        intention_slot(self.environment.task)
    }

    pub fn policy_spec(&self, kind: RobotKind) -> NetworkSpec {
        let input = self.base_channels() + self.variant.channels(self.team.len());
        NetworkSpec::for_scale(self.scale, input, kind.action_channels())
    }

    /// Predictor input: the state without the intention slot.
    pub fn predictor_spec(&self) -> Option<NetworkSpec> {
        let IntentionVariant::Predicted { history } = self.variant else {
            return None;
        };
        Some(crate::predictor::predictor_spec(self.scale, self.base_channels() + usize::from(history)))
    }

    pub fn gamma(&self) -> f64 {
        self.train.gamma_for(self.environment.task)
    }

    pub fn episode_config(&self, channel_seed: u64, tick_budget: Option<u64>) -> EpisodeConfig {
        EpisodeConfig {
            variant: self.variant,
            tensor: self.tensor,
            channel: self.channel,
            channel_seed,
            tick_budget,
        }
    }
}

/// Independent sub-seed number `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}
