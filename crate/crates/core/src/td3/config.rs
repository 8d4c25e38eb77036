use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// TD3 hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    /// critic updates per actor update
    pub policy_delay: u64,
    pub sigma_explore: f64,
    pub sigma_target: f64,
    pub noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Environment steps taken with uniform random actions before learning starts.
    pub warmup_steps: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            sigma_explore: 0.1,
            sigma_target: 0.2,
            noise_clip: 0.5,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            warmup_steps: 1000,
            action_dim: 1,
            obs_dim: 2,
            hidden: vec![64, 64],
            reward_scale: 1.0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid("tau", format!("must lie in [0, 1], got {}", self.tau)));
        }
        if self.policy_delay < 1 {
            return Err(Error::invalid("policy_delay", "must be >= 1"));
        }
        if !(self.noise_clip > 0.0) {
            return Err(Error::invalid("noise_clip", "must be > 0"));
        }
        if !(self.sigma_explore >= 0.0 && self.sigma_target >= 0.0) {
            return Err(Error::invalid("sigma", "noise standard deviations must be >= 0"));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::invalid("batch_size", "need 0 < batch_size <= buffer_capacity"));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::invalid("lr", "learning rates must be > 0"));
        }
        if self.action_dim == 0 || self.obs_dim == 0 {
            return Err(Error::invalid("action_dim", "dimensions must be > 0"));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(Error::invalid("reward_scale", "must be > 0"));
        }
        Ok(())
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(self.action_dim);
        s
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim + self.action_dim];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    /// Buffer size below which `train_step` performs no update.
    pub fn min_buffer(&self) -> usize {
        self.batch_size.max(self.warmup_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Td3Config::default();
        c.validate().unwrap();
        assert_eq!(c.actor_sizes(), vec![2, 64, 64, 1]);
        assert_eq!(c.critic_sizes(), vec![3, 64, 64, 1]);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            Td3Config { gamma: 1.5, ..Default::default() },
            Td3Config { policy_delay: 0, ..Default::default() },
            Td3Config { noise_clip: 0.0, ..Default::default() },
            Td3Config { sigma_target: -0.1, ..Default::default() },
            Td3Config { batch_size: 0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
