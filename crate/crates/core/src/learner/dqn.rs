use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::Task;
use crate::error::{Error, Result};
use crate::gridcore::ScalarMap;
use crate::perception::StateTensor;
use crate::scalar::Scalar;

use super::network::{pack, FcnNet};
use super::nn::Act;

/// Per-pixel action values, one channel per action type.
pub type QValueMap<T> = StateTensor<T>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionIndex {
    pub channel: usize,
    pub row: usize,
    pub col: usize,
}

impl ActionIndex {
    pub fn new(channel: usize, row: usize, col: usize) -> Self {
        ActionIndex { channel, row, col }
    }

    pub fn linear(self, size: usize) -> usize {
        (self.channel * size + self.row) * size + self.col
    }

    pub fn from_linear(i: usize, size: usize) -> Self {
        ActionIndex {
            channel: i / (size * size),
            row: i / size % size,
            col: i % size,
        }
    }
}

/// Global argmax; ties go to the lowest linear index.
pub fn argmax<T: Scalar>(q: &QValueMap<T>) -> Result<ActionIndex> {
    let data = q.data();
    if data.is_empty() {
        return Err(Error::input("empty Q-value map"));
    }
    let mut best = 0;
    for (i, &v) in data.iter().enumerate().skip(1) {
        if v > data[best] {
            best = i;
        }
    }
    Ok(ActionIndex::from_linear(best, q.size()))
}

/// Epsilon-greedy choice over every (channel, row, col).
pub fn select_action<T: Scalar>(q: &QValueMap<T>, epsilon: f64, rng: &mut impl Rng) -> Result<ActionIndex> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::input(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let greedy = argmax(q)?;
    if rng.gen::<f64>() < epsilon {
        return Ok(ActionIndex::from_linear(rng.gen_range(0..q.data().len()), q.size()));
    }
    Ok(greedy)
}

#[derive(Clone, Debug)]
pub struct Transition<T> {
    pub state: Arc<StateTensor<T>>,
    pub action: ActionIndex,
    pub reward: f64,
    pub next_state: Arc<StateTensor<T>>,
    pub terminal: bool,
    /// Communicated intention map at decision time, kept for predictor
    /// supervision.
    pub intention_target: Option<Arc<ScalarMap<T>>>,
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<Transition<T>>,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition<T>) -> Result<()> {
        if t.state.channels() != t.next_state.channels() || t.state.size() != t.next_state.size() {
            return Err(Error::input("next state shape differs from state"));
        }
        if !t.reward.is_finite() {
            return Err(Error::input("reward must be finite"));
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition<T>> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.items.iter()
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}

fn default_total_steps() -> u64 {
    160_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub grad_clip: f64,
    /// Discount; `None` picks the task default.
    pub gamma: Option<f64>,
    pub train_freq: u64,
    pub target_update: u64,
    pub total_steps: u64,
    /// Random-policy prefill lasts `total_steps / prefill_divisor` steps.
    pub prefill_divisor: u64,
    /// Exploration anneals over `total_steps / exploration_divisor` steps.
    pub exploration_divisor: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub eval_epsilon: f64,
    pub buffer_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 32,
            grad_clip: 100.0,
            gamma: None,
            train_freq: 4,
            target_update: 1000,
            total_steps: default_total_steps(),
            prefill_divisor: 40,
            exploration_divisor: 10,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            eval_epsilon: 0.01,
            buffer_capacity: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn gamma_for(&self, task: Task) -> f64 {
        self.gamma.unwrap_or(match task {
            Task::Foraging => 0.85,
            Task::SearchAndRescue => 0.35,
        })
    }

    pub fn prefill_steps(&self) -> u64 {
        self.total_steps / self.prefill_divisor.max(1)
    }

    pub fn anneal_steps(&self) -> u64 {
        self.total_steps / self.exploration_divisor.max(1)
    }

    /// Steps are counted from 1; the policy trains on multiples of the
    /// train frequency once prefill is over.
    pub fn is_train_step(&self, step: u64) -> bool {
        step > self.prefill_steps() && step.is_multiple_of(self.train_freq)
    }

    pub fn is_sync_step(&self, step: u64) -> bool {
        step > 0 && step.is_multiple_of(self.target_update)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0
            && self.batch_size > 0
            && self.grad_clip > 0.0
            && self.gamma.is_none_or(|g| (0.0..=1.0).contains(&g))
            && self.train_freq > 0
            && self.target_update > 0
            && self.total_steps > 0
            && self.buffer_capacity >= self.batch_size
            && (0.0..=1.0).contains(&self.epsilon_start)
            && (0.0..=1.0).contains(&self.epsilon_end)
            && (0.0..=1.0).contains(&self.eval_epsilon);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid training config {self:?}")))
        }
    }
}

/// Linear exploration schedule, constant after the anneal window.
pub fn epsilon_at(step: u64, cfg: &TrainConfig) -> f64 {
    let anneal = cfg.anneal_steps();
    if step >= anneal {
        return cfg.epsilon_end;
    }
    let frac = step as f64 / anneal as f64;
    cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)
}

/// Copies the online network into the target network on sync steps.
pub fn sync_target<T: Scalar>(online: &FcnNet<T>, target: &mut FcnNet<T>, step: u64, cfg: &TrainConfig) -> bool {
    if !cfg.is_sync_step(step) {
        return false;
    }
    target.copy_from(online);
    true
}

/// Anything that maps states to Q-value maps.
pub trait QFunction<T> {
    fn q_values(&self, states: &[&StateTensor<T>]) -> Result<Vec<QValueMap<T>>>;
}

impl<T: Scalar> QFunction<T> for FcnNet<T> {
    fn q_values(&self, states: &[&StateTensor<T>]) -> Result<Vec<QValueMap<T>>> {
        self.forward(states)
    }
}

/// `r` for terminal transitions, else `r + gamma * Q_target(s', argmax_a
/// Q_online(s', a))`.
pub fn double_dqn_targets<T: Scalar, O: QFunction<T> + ?Sized, G: QFunction<T> + ?Sized>(
    batch: &[&Transition<T>],
    online: &O,
    target: &G,
    gamma: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminal).collect();
    let mut out: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if live.is_empty() || gamma == 0.0 {
        return Ok(out);
    }
    let next: Vec<&StateTensor<T>> = live.iter().map(|&i| batch[i].next_state.as_ref()).collect();
    let q_online = online.q_values(&next)?;
    let q_target = target.q_values(&next)?;
    for ((&i, qo), qt) in live.iter().zip(&q_online).zip(&q_target) {
        let a = argmax(qo)?.linear(qo.size());
        out[i] += gamma * qt.data()[a].as_f64();
    }
    Ok(out)
}

/// Mean smooth-L1 loss and its gradient with respect to `pred`.
pub fn smooth_l1(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += if d.abs() < 1.0 { 0.5 * d * d } else { d.abs() - 0.5 };
            d.clamp(-1.0, 1.0) / n
        })
        .collect();
    (loss / n, grad)
}

/// Global gradient norm over trainable parameters.
pub fn grad_norm<T: Scalar>(net: &FcnNet<T>) -> f64 {
    net.params()
        .iter()
        .filter(|p| p.trainable)
        .flat_map(|p| p.grad.iter())
        .map(|g| g.as_f64() * g.as_f64())
        .sum::<f64>()
        .sqrt()
}

/// Clips the gradient norm, then applies SGD with momentum and weight decay.
pub fn sgd_step<T: Scalar>(net: &mut FcnNet<T>, cfg: &TrainConfig) {
    let norm = grad_norm(net);
    let scale = if norm > cfg.grad_clip { cfg.grad_clip / (norm + 1e-6) } else { 1.0 };
    let (scale, wd, mom, lr) = (T::lit(scale), T::lit(cfg.weight_decay), T::lit(cfg.momentum), T::lit(cfg.learning_rate));
    for p in net.params_mut().into_iter().filter(|p| p.trainable) {
        for ((v, g), buf) in p.value.iter_mut().zip(&p.grad).zip(p.velocity.iter_mut()) {
            let d = *g * scale + wd * *v;
            *buf = mom * *buf + d;
            *v -= lr * *buf;
        }
    }
}

/// Training-mode forward on the batch states, then the loss against fixed
/// targets. Leaves gradients in the network without updating it.
pub fn loss_and_gradients<T: Scalar>(net: &mut FcnNet<T>, batch: &[&Transition<T>], targets: &[f64]) -> Result<f64> {
    let states: Vec<&StateTensor<T>> = batch.iter().map(|t| t.state.as_ref()).collect();
    let x = pack(&states)?;
    net.zero_grad();
    let q = net.train_batch(&x)?;
    let n = batch.len();
    let index = |b: usize, a: &ActionIndex| ((a.channel * n + b) * q.h + a.row) * q.w + a.col;
    let mut pred = Vec::with_capacity(n);
    for (b, t) in batch.iter().enumerate() {
        if t.action.channel >= q.c || t.action.row >= q.h || t.action.col >= q.w {
            return Err(Error::input(format!("action {:?} outside Q-map", t.action)));
        }
        pred.push(q.data[index(b, &t.action)].as_f64());
    }
    let (loss, grad) = smooth_l1(&pred, targets);
    let mut dq = Act::zeros(q.c, q.n, q.h, q.w);
    for (b, t) in batch.iter().enumerate() {
        dq.data[index(b, &t.action)] = T::lit(grad[b]);
    }
    net.backward(&dq);
    Ok(loss)
}

/// One double-DQN update on a given batch; returns the loss before the
/// update.
pub fn train_on_batch<T: Scalar>(
    online: &mut FcnNet<T>,
    target: &FcnNet<T>,
    batch: &[&Transition<T>],
    cfg: &TrainConfig,
    gamma: f64,
) -> Result<f64> {
    let targets = double_dqn_targets(batch, &*online, target, gamma)?;
    let loss = loss_and_gradients(online, batch, &targets)?;
    sgd_step(online, cfg);
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainStepOutcome {
    pub loss: f64,
    /// Buffer indices of the sampled batch.
    pub indices: Vec<usize>,
}

/// Gated training step: returns `None` off-schedule or while the buffer
/// holds fewer than a batch.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Scalar>(
    buffer: &ReplayBuffer<T>,
    online: &mut FcnNet<T>,
    target: &FcnNet<T>,
    cfg: &TrainConfig,
    step: u64,
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<Option<TrainStepOutcome>> {
    if !cfg.is_train_step(step) || buffer.len() < cfg.batch_size {
        return Ok(None);
    }
    let indices = buffer.sample_indices(cfg.batch_size, rng);
    let batch: Vec<&Transition<T>> = indices.iter().map(|&i| buffer.get(i).expect("sampled index")).collect();
    let loss = train_on_batch(online, target, &batch, cfg, gamma)?;
    Ok(Some(TrainStepOutcome { loss, indices }))
}
