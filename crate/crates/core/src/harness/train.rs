use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::{intention_slot, run_episode, Controller, DecisionContext};
use crate::environment::{generate_environment, RobotKind, SeedPolicy};
use crate::error::{Error, Result};
use crate::gridcore::ScalarMap;
use crate::learner::{
    epsilon_at, save_checkpoint, select_action, sync_target, train_on_batch, ActionIndex, FcnNet, ReplayBuffer,
    Transition, POLICY_MAGIC, PREDICTOR_MAGIC,
};
use crate::perception::StateTensor;
use crate::predictor::{intention_source, predict_intention, train_predictor_on_batch, IntentionSource, RunMode};

use super::config::{derive_seed, RunConfig};

/// One row of `train_log.csv`, written after every gradient step of a kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    pub episode: u64,
    pub kind: String,
    pub epsilon: f64,
    pub loss: f64,
    /// Empty for variants without a predictor.
    pub predictor_loss: Option<f64>,
    pub buffer_size: usize,
}

/// One row of `train_episodes.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRow {
    pub episode: u64,
    pub env_seed: u64,
    pub end_step: u64,
    pub ticks: u64,
    pub objects_removed: usize,
    pub team_return: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub steps: u64,
    pub episodes: u64,
    pub train_steps: u64,
    pub sync_steps: Vec<u64>,
    pub checkpoint_steps: Vec<u64>,
    /// Buffer size of each kind when it took its first gradient step.
    pub first_train_buffer: BTreeMap<String, usize>,
}

struct KindLearner {
    online: FcnNet<f32>,
    target: FcnNet<f32>,
    buffer: ReplayBuffer<f32>,
    predictor: Option<FcnNet<f32>>,
}

pub struct Trainer {
    cfg: RunConfig,
    seed: u64,
    learners: BTreeMap<RobotKind, KindLearner>,
    rng: ChaCha8Rng,
    step: u64,
    episode: u64,
    slot: usize,
    pub log: Vec<TrainLogRow>,
    pub summary: TrainSummary,
    checkpoint_dir: Option<PathBuf>,
}

impl Trainer {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut learners = BTreeMap::new();
        for (i, kind) in cfg.team.distinct().into_iter().enumerate() {
            let init = derive_seed(seed, 100 + i as u64);
            let online = FcnNet::new(cfg.policy_spec(kind), init)?;
            let mut target = FcnNet::new(cfg.policy_spec(kind), init)?;
            target.copy_from(&online);
            let predictor = match cfg.predictor_spec() {
                Some(spec) => Some(FcnNet::new(spec, derive_seed(seed, 200 + i as u64))?),
                None => None,
            };
            learners.insert(
                kind,
                KindLearner {
                    online,
                    target,
                    buffer: ReplayBuffer::new(cfg.train.buffer_capacity),
                    predictor,
                },
            );
        }
        Ok(Trainer {
            cfg: cfg.clone(),
            seed,
            learners,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            step: 0,
            episode: 0,
            slot: intention_slot(cfg.environment.task),
            log: Vec::new(),
            summary: TrainSummary {
                seed,
                ..TrainSummary::default()
            },
            checkpoint_dir: None,
        })
    }

    /// Periodic checkpoints go to this directory.
    pub fn with_checkpoints(mut self, dir: &Path) -> Self {
        self.checkpoint_dir = Some(dir.to_path_buf());
        self
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn policy(&self, kind: RobotKind) -> Option<&FcnNet<f32>> {
        self.learners.get(&kind).map(|l| &l.online)
    }

    pub fn predictor(&self, kind: RobotKind) -> Option<&FcnNet<f32>> {
        self.learners.get(&kind).and_then(|l| l.predictor.as_ref())
    }

    pub fn buffer_len(&self, kind: RobotKind) -> usize {
        self.learners.get(&kind).map_or(0, |l| l.buffer.len())
    }

    fn env_seed(&self, episode: u64) -> u64 {
        match self.cfg.environment.seed_policy {
            SeedPolicy::Fixed(s) => derive_seed(s, episode),
            SeedPolicy::Unseeded => derive_seed(derive_seed(self.seed, 2), episode),
        }
    }

    /// Runs episodes until `total_steps` transitions have been recorded.
    pub fn run(&mut self) -> Result<Vec<EpisodeLogRow>> {
        let mut episodes = Vec::new();
        let team = self.cfg.team.kinds().to_vec();
        while self.step < self.cfg.train.total_steps {
            let env_seed = self.env_seed(self.episode);
            let mut world = generate_environment(&self.cfg.environment, &team, env_seed)?;
            let ep_cfg = self.cfg.episode_config(derive_seed(env_seed, 3), None);
            let before = self.step;
            let metrics = run_episode(&mut world, self, &ep_cfg)?;
            episodes.push(EpisodeLogRow {
                episode: self.episode,
                env_seed,
                end_step: self.step,
                ticks: metrics.ticks,
                objects_removed: metrics.objects_removed,
                team_return: metrics.returns.iter().sum(),
            });
            self.episode += 1;
            if self.step == before {
                return Err(Error::input("episode ended without any decision"));
            }
        }
        self.summary.steps = self.step;
        self.summary.episodes = self.episode;
        Ok(episodes)
    }

    fn train_all(&mut self) -> Result<()> {
        let gamma = self.cfg.gamma();
        let eps = epsilon_at(self.step, &self.cfg.train);
        let train = self.cfg.train.clone();
        let mut trained = false;
        for (kind, l) in self.learners.iter_mut() {
            if l.buffer.len() < train.batch_size {
                continue;
            }
            trained = true;
            self.summary.first_train_buffer.entry(kind.name().to_string()).or_insert(l.buffer.len());
            let indices = l.buffer.sample_indices(train.batch_size, &mut self.rng);
            let batch: Vec<&Transition<f32>> = indices.iter().map(|&i| l.buffer.get(i).expect("sampled")).collect();
            let loss = train_on_batch(&mut l.online, &l.target, &batch, &train, gamma)?;
            let mut predictor_loss = None;
            if let Some(p) = l.predictor.as_mut() {
                let inputs: Vec<StateTensor<f32>> = batch.iter().map(|t| t.state.without_channel(self.slot)).collect();
                let targets: Vec<&ScalarMap<f32>> = batch
                    .iter()
                    .map(|t| t.intention_target.as_deref().ok_or_else(|| Error::input("transition lacks an intention target")))
                    .collect::<Result<_>>()?;
                let refs: Vec<&StateTensor<f32>> = inputs.iter().collect();
                predictor_loss = Some(train_predictor_on_batch(p, &refs, &targets, &train)?);
            }
            self.log.push(TrainLogRow {
                step: self.step,
                episode: self.episode,
                kind: kind.name().to_string(),
                epsilon: eps,
                loss,
                predictor_loss,
                buffer_size: l.buffer.len(),
            });
        }
        if trained {
            self.summary.train_steps += 1;
        }
        Ok(())
    }

    fn checkpoint(&mut self, tag: &str) -> Result<()> {
        let Some(dir) = self.checkpoint_dir.clone() else {
            return Ok(());
        };
        fs::create_dir_all(&dir)?;
        let meta = self.metadata();
        for (kind, l) in &self.learners {
            save_checkpoint(&dir.join(format!("policy_{}{tag}.simq", kind.name())), POLICY_MAGIC, &l.online, &meta)?;
            if let Some(p) = &l.predictor {
                save_checkpoint(&dir.join(format!("predictor_{}{tag}.simp", kind.name())), PREDICTOR_MAGIC, p, &meta)?;
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.cfg,
            "seed": self.seed,
            "step": self.step,
            "conventions": {
                "aborted_primitive": "sender re-announces its current cell as a one-cell path",
                "stored_paths": "receivers drop one traversed cell per elapsed tick",
            },
        })
    }

    /// Writes the final checkpoints into `dir`.
    pub fn save_final(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = self.metadata();
        for (kind, l) in &self.learners {
            save_checkpoint(&dir.join(policy_file(*kind)), POLICY_MAGIC, &l.online, &meta)?;
            if let Some(p) = &l.predictor {
                save_checkpoint(&dir.join(predictor_file(*kind)), PREDICTOR_MAGIC, p, &meta)?;
            }
        }
        Ok(())
    }
}

pub fn policy_file(kind: RobotKind) -> String {
    format!("policy_{}.simq", kind.name())
}

pub fn predictor_file(kind: RobotKind) -> String {
    format!("predictor_{}.simp", kind.name())
}

impl Controller for Trainer {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex> {
        let kind = ctx.world.agents[ctx.agent].kind;
        let size = ctx.state.size();
        if self.step < self.cfg.train.prefill_steps() {
            let channels = kind.action_channels();
            let i = self.rng.gen_range(0..channels * size * size);
            return Ok(ActionIndex::from_linear(i, size));
        }
        let eps = epsilon_at(self.step, &self.cfg.train);
        let l = &self.learners[&kind];
        let q = l.online.forward(&[ctx.state])?.remove(0);
        select_action(&q, eps, &mut self.rng)
    }

    fn record(&mut self, kind: RobotKind, transition: Transition<f32>) -> Result<()> {
        let total = self.cfg.train.total_steps;
        if self.step >= total {
            return Ok(());
        }
        self.learners
            .get_mut(&kind)
            .ok_or_else(|| Error::config(format!("no policy for {kind} robots")))?
            .buffer
            .push(transition)?;
        self.step += 1;
        if self.cfg.train.is_train_step(self.step) {
            self.train_all()?;
        }
        if self.cfg.train.is_sync_step(self.step) {
            let train = self.cfg.train.clone();
            for l in self.learners.values_mut() {
                sync_target(&l.online, &mut l.target, self.step, &train);
            }
            self.summary.sync_steps.push(self.step);
        }
        let every = (total / 10).max(1);
        if self.step.is_multiple_of(every) {
            self.summary.checkpoint_steps.push(self.step);
            self.checkpoint(&format!("_step{:08}", self.step))?;
        }
        Ok(())
    }

    fn supports(&self, kind: RobotKind) -> bool {
        self.learners.contains_key(&kind)
    }

    fn intention_source(&self) -> IntentionSource {
        intention_source(self.step, self.cfg.train.total_steps, RunMode::Train)
    }

    fn predict(&mut self, kind: RobotKind, input: &StateTensor<f32>) -> Result<ScalarMap<f32>> {
        let net = self
            .predictor(kind)
            .ok_or_else(|| Error::config(format!("no intention predictor for {kind} robots")))?;
        predict_intention(net, input)
    }

    fn should_stop(&self) -> bool {
        self.step >= self.cfg.train.total_steps
    }
}

pub struct TrainOutput {
    pub trainer: Trainer,
    pub episodes: Vec<EpisodeLogRow>,
}

/// Full training run. With `out`, writes final and periodic checkpoints,
/// `train_log.csv`, `train_episodes.csv` and `run_metadata.json`.
pub fn train(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(cfg, seed)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        trainer = trainer.with_checkpoints(&dir.join("checkpoints"));
    }
    let episodes = trainer.run()?;
    if let Some(dir) = out {
        trainer.save_final(dir)?;
        super::write_csv(&dir.join("train_log.csv"), &trainer.log)?;
        super::write_csv(&dir.join("train_episodes.csv"), &episodes)?;
        let meta = serde_json::json!({
            "config": cfg,
            "seed": seed,
            "summary": trainer.summary,
        });
        fs::write(dir.join("run_metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    }
    Ok(TrainOutput { trainer, episodes })
}
