//! Decentralized execution: intention messages, mailboxes, a lossy channel
//! model and the asynchronous episode driver.

mod channel;
mod episode;
mod message;

pub use channel::{broadcast_intention, ground_truth_records, intentions_for, ChannelModel, Comms, Mailbox, StoredMessage};
pub use episode::{
    intention_slot, read_trajectory, run_episode, write_trajectory, Controller, DecisionContext, EpisodeConfig,
    EpisodeMetrics, TrajectoryRow,
};
pub use message::{IntentionMessage, HEADER_BYTES};
