//! PPO training: networks, rollouts, advantage estimation and updates.

pub mod checkpoint;
pub mod gae;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod toy;
