use serde::{Deserialize, Serialize};

use super::agent::Td3Agent;
use super::buffer::Transition;
use crate::error::Result;

/// Outcome of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Minimal episodic interface the training loop drives.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts episode number `episode`; any randomness must derive from it.
    fn reset_episode(&mut self, episode: u64) -> Result<Vec<f64>>;
    fn step_env(&mut self, action: &[f64]) -> Result<EnvStep>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeEnd {
    Terminated,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    /// Undiscounted sum of raw environment rewards.
    pub episode_return: f64,
    pub length: usize,
    pub end: EpisodeEnd,
    pub critic_updates: u64,
    pub actor_updates: u64,
}

/// Counters that let an interrupted run continue where it stopped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainerState {
    pub episodes_done: u64,
    pub env_steps: u64,
}

/// Runs one learning episode: warm-up steps use uniform random actions,
/// afterwards the noisy actor acts; every step stores its transition and
/// calls `train_step` once.
pub fn run_training_episode<E: Environment + ?Sized>(
    agent: &mut Td3Agent,
    env: &mut E,
    state: &mut TrainerState,
) -> Result<EpisodeStats> {
    let episode = state.episodes_done;
    let mut obs = env.reset_episode(episode)?;
    let mut total = 0.0;
    let mut length = 0;
    let end = loop {
        let action = if state.env_steps < agent.config.warmup_steps as u64 {
            agent.random_action()
        } else {
            agent.act(&obs)?
        };
        let step = env.step_env(&action)?;
        state.env_steps += 1;
        length += 1;
        total += step.reward;
        agent.remember(Transition {
            obs: std::mem::take(&mut obs),
            action,
            reward: step.reward,
            next_obs: step.obs.clone(),
            done: step.terminated,
        })?;
        agent.train_step()?;
        obs = step.obs;
        if step.terminated {
            break EpisodeEnd::Terminated;
        }
        if step.truncated {
            break EpisodeEnd::Truncated;
        }
    };
    state.episodes_done += 1;
    Ok(EpisodeStats {
        episode,
        episode_return: total,
        length,
        end,
        critic_updates: agent.critic_updates,
        actor_updates: agent.actor_updates,
    })
}

/// Runs `episodes` further training episodes, reporting each to `on_episode`.
pub fn train<E: Environment + ?Sized>(
    agent: &mut Td3Agent,
    env: &mut E,
    state: &mut TrainerState,
    episodes: u64,
    mut on_episode: impl FnMut(&EpisodeStats, &Td3Agent, &TrainerState) -> Result<()>,
) -> Result<Vec<EpisodeStats>> {
    let mut all = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        let stats = run_training_episode(agent, env, state)?;
        on_episode(&stats, agent, state)?;
        all.push(stats);
    }
    Ok(all)
}
