//! Twin Delayed DDPG.

mod agent;
mod buffer;
mod config;
pub mod toy;
mod trainer;

pub use agent::{
    clip_noise, compute_target, select_action, smoothing_noise, update_actor, update_critics, TrainDiagnostics,
    TrainStatus, Td3Agent, AGENT_CHECKPOINT_VERSION,
};
pub use buffer::{ReplayBuffer, Transition};
pub use config::Td3Config;
pub use trainer::{run_training_episode, train, EnvStep, Environment, EpisodeEnd, EpisodeStats, TrainerState};
