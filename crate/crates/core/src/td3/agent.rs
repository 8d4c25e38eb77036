use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::config::Td3Config;
use crate::error::{Error, Result};
use crate::nn::{Activations, AdamConfig, AdamState, Gradients, Mlp, OutputActivation};

pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

/// Deterministic policy plus clipped Gaussian exploration noise.
pub fn select_action<R: Rng + ?Sized>(actor: &Mlp, obs: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut a = actor.forward(obs)?;
    if sigma > 0.0 {
        for v in &mut a {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * z).clamp(-1.0, 1.0);
        }
    } else {
        a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    }
    Ok(a)
}

/// `clip(N(0, sigma), -c, c)`.
pub fn smoothing_noise<R: Rng + ?Sized>(sigma: f64, c: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    clip_noise(sigma * z, c)
}

pub fn clip_noise(draw: f64, c: f64) -> f64 {
    draw.clamp(-c, c)
}

fn critic_input(obs: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + action.len());
    x.extend_from_slice(obs);
    x.extend_from_slice(action);
    x
}

/// Clipped double-Q targets with target policy smoothing:
/// `y = r + gamma (1 - done) min_i Q'_i(s', clip(pi'(s') + eps, -1, 1))`.
pub fn compute_target<R: Rng + ?Sized>(
    batch: &[&Transition],
    critic1_target: &Mlp,
    critic2_target: &Mlp,
    actor_target: &Mlp,
    cfg: &Td3Config,
    rng: &mut R,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let mut a = actor_target.forward(&t.next_obs)?;
            for v in &mut a {
                *v = (*v + smoothing_noise(cfg.sigma_target, cfg.noise_clip, rng)).clamp(-1.0, 1.0);
            }
            if t.done {
                return Ok(t.reward);
            }
            let x = critic_input(&t.next_obs, &a);
            let q1 = critic1_target.forward(&x)?[0];
            let q2 = critic2_target.forward(&x)?[0];
            Ok(t.reward + cfg.gamma * q1.min(q2))
        })
        .collect()
}

fn critic_regression(batch: &[&Transition], y: &[f64], critic: &mut Mlp, opt: &mut AdamState, lr: f64) -> Result<f64> {
    if y.len() != batch.len() {
        return Err(Error::ShapeMismatch {
            expected: batch.len(),
            got: y.len(),
        });
    }
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros_like(critic);
    let mut acts = Activations::default();
    let mut loss = 0.0;
    for (t, target) in batch.iter().zip(y) {
        critic.forward_cached(&critic_input(&t.obs, &t.action), &mut acts)?;
        let residual = acts.output()[0] - target;
        loss += residual * residual / n;
        critic.backward_into(&acts, &[2.0 * residual / n], &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { what: "critic", value: loss });
    }
    opt.step(critic, &grads, lr)?;
    Ok(loss)
}

/// One Adam step per critic on the mean squared error against `y`.
/// Returns the two pre-update losses.
pub fn update_critics(
    batch: &[&Transition],
    y: &[f64],
    critics: [&mut Mlp; 2],
    opts: [&mut AdamState; 2],
    cfg: &Td3Config,
) -> Result<(f64, f64)> {
    let [c1, c2] = critics;
    let [o1, o2] = opts;
    let l1 = critic_regression(batch, y, c1, o1, cfg.lr_critic)?;
    let l2 = critic_regression(batch, y, c2, o2, cfg.lr_critic)?;
    Ok((l1, l2))
}

/// Deterministic policy gradient step: descends `-mean Q1(s, pi(s))` with the
/// gradient flowing through the critic's action input. The critic is read only.
pub fn update_actor(
    batch: &[&Transition],
    actor: &mut Mlp,
    critic1: &Mlp,
    opt: &mut AdamState,
    cfg: &Td3Config,
) -> Result<f64> {
    let n = batch.len() as f64;
    let obs_dim = actor.input_dim();
    let mut actor_grads = Gradients::zeros_like(actor);
    let mut critic_scratch = Gradients::zeros_like(critic1);
    let mut actor_acts = Activations::default();
    let mut critic_acts = Activations::default();
    let mut loss = 0.0;
    for t in batch {
        actor.forward_cached(&t.obs, &mut actor_acts)?;
        critic1.forward_cached(&critic_input(&t.obs, actor_acts.output()), &mut critic_acts)?;
        loss -= critic_acts.output()[0] / n;
        let dx = critic1.backward_into(&critic_acts, &[-1.0 / n], &mut critic_scratch)?;
        actor.backward_into(&actor_acts, &dx[obs_dim..], &mut actor_grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { what: "actor", value: loss });
    }
    opt.step(actor, &actor_grads, cfg.lr_actor)?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    WarmingUp,
    Updated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDiagnostics {
    pub status: TrainStatus,
    pub critic_losses: Option<(f64, f64)>,
    pub actor_loss: Option<f64>,
}

/// Networks, optimizers, replay memory and RNG of one TD3 learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Td3Agent {
    pub version: u32,
    pub config: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub buffer: ReplayBuffer,
    pub rng: ChaCha8Rng,
    pub critic_updates: u64,
    pub actor_updates: u64,
}

impl Td3Agent {
    pub fn new(config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::new(&config.actor_sizes(), OutputActivation::Tanh, &mut rng)?;
        let critic1 = Mlp::new(&config.critic_sizes(), OutputActivation::Linear, &mut rng)?;
        let critic2 = Mlp::new(&config.critic_sizes(), OutputActivation::Linear, &mut rng)?;
        let adam = AdamConfig::default();
        Ok(Td3Agent {
            version: AGENT_CHECKPOINT_VERSION,
            actor_opt: AdamState::new(&actor, adam),
            critic1_opt: AdamState::new(&critic1, adam),
            critic2_opt: AdamState::new(&critic2, adam),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            rng,
            config,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    /// Exploratory action from the online actor.
    pub fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        select_action(&self.actor, obs, self.config.sigma_explore, &mut self.rng)
    }

    /// Uniform random action in the unit box (warm-up exploration).
    pub fn random_action(&mut self) -> Vec<f64> {
        (0..self.config.action_dim).map(|_| self.rng.random_range(-1.0..=1.0)).collect()
    }

    pub fn remember(&mut self, mut t: Transition) -> Result<()> {
        if t.action.len() != self.config.action_dim {
            return Err(Error::ShapeMismatch {
                expected: self.config.action_dim,
                got: t.action.len(),
            });
        }
        if !t.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        t.action.iter_mut().for_each(|a| *a = a.clamp(-1.0, 1.0));
        t.reward *= self.config.reward_scale;
        self.buffer.push(t);
        Ok(())
    }

    /// Critic regression on one sampled batch; every `policy_delay`-th update
    /// also moves the actor and blends all target networks.
    pub fn train_step(&mut self) -> Result<TrainDiagnostics> {
        if self.buffer.len() < self.config.min_buffer() {
            return Ok(TrainDiagnostics {
                status: TrainStatus::WarmingUp,
                critic_losses: None,
                actor_loss: None,
            });
        }
        let cfg = &self.config;
        let batch = self
            .buffer
            .sample(cfg.batch_size, &mut self.rng)
            .expect("buffer holds at least one batch");
        let y = compute_target(
            &batch,
            &self.critic1_target,
            &self.critic2_target,
            &self.actor_target,
            cfg,
            &mut self.rng,
        )?;
        let losses = update_critics(
            &batch,
            &y,
            [&mut self.critic1, &mut self.critic2],
            [&mut self.critic1_opt, &mut self.critic2_opt],
            cfg,
        )?;
        self.critic_updates += 1;

        let mut actor_loss = None;
        if self.critic_updates.is_multiple_of(cfg.policy_delay) {
            actor_loss = Some(update_actor(&batch, &mut self.actor, &self.critic1, &mut self.actor_opt, cfg)?);
            self.actor_updates += 1;
            self.actor_target.soft_update(&self.actor, cfg.tau)?;
            self.critic1_target.soft_update(&self.critic1, cfg.tau)?;
            self.critic2_target.soft_update(&self.critic2, cfg.tau)?;
        }
        Ok(TrainDiagnostics {
            status: TrainStatus::Updated,
            critic_losses: Some(losses),
            actor_loss,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("agent serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let agent: Td3Agent = serde_json::from_str(text)?;
        if agent.version != AGENT_CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: agent.version,
                expected: AGENT_CHECKPOINT_VERSION,
            });
        }
        agent.config.validate()?;
        Ok(agent)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
