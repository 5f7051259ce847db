//! Fully convolutional Q-networks, replay memory and the double-DQN update.

mod checkpoint;
mod dqn;
pub mod network;
pub mod nn;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, TensorEntry,
    POLICY_MAGIC, PREDICTOR_MAGIC,
};
pub use dqn::{
    argmax, double_dqn_targets, epsilon_at, grad_norm, loss_and_gradients, select_action, sgd_step, smooth_l1,
    sync_target, train_on_batch, train_step, ActionIndex, QFunction, QValueMap, ReplayBuffer, TrainConfig,
    TrainStepOutcome, Transition,
};
pub use network::{BlockSpec, FcnNet, NetworkSpec, Scale};
