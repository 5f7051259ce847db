//! Ground-truth world: layout generation, motion and end-effector
//! primitives, collision resolution, rewards and episode termination.

mod dynamics;
mod generate;
mod log;
mod spec;
mod world;

pub use dynamics::{begin_primitive, is_episode_done, tick};
pub use generate::generate_environment;
pub use log::{read_event_log, write_event_log};
pub use spec::{Dims, EnvironmentSpec, Layout, SeedPolicy, Task};
pub use world::{
    Action, AgentState, Effector, ObjectState, Primitive, Receptacle, RewardEvent, RewardKind, RobotKind, WorldState,
};
