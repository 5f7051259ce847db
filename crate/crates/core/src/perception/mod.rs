//! Per-agent belief maintenance and egocentric state tensors, including every
//! intention encoding variant.

mod belief;
mod intention;
mod tensor;

pub use belief::{integrate_observation, sense, AgentBelief, ObservedAgent, ObservedObject, HISTORY_CAPACITY};
pub use intention::{encode_intention, IntentionEncoding, IntentionRecord, IntentionVariant};
pub use tensor::{
    build_state_tensor, channel_names, StateTensor, TensorConfig, AGENT_OTHER, AGENT_OTHER_CARRYING, AGENT_SELF,
    AGENT_SELF_CARRYING, ENV_FREE, ENV_OBSTACLE, ENV_UNKNOWN,
};
