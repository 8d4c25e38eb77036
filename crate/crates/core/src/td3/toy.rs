//! One-dimensional integrator used to smoke-test the learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trainer::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Position error driven by a velocity command: `x <- x + gain * a`,
/// reward `-|x|`. Episodes truncate after `horizon` steps.
#[derive(Debug, Clone)]
pub struct IntegratorEnv {
    pub seed: u64,
    pub gain: f64,
    pub horizon: usize,
    x: f64,
    t: usize,
}

impl IntegratorEnv {
    pub fn new(seed: u64) -> Self {
        IntegratorEnv {
            seed,
            gain: 0.1,
            horizon: 50,
            x: 0.0,
            t: 0,
        }
    }

    pub fn position(&self) -> f64 {
        self.x
    }
}

impl Environment for IntegratorEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset_episode(&mut self, episode: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.x = rng.random_range(-1.0..=1.0);
        self.t = 0;
        Ok(vec![self.x])
    }

    fn step_env(&mut self, action: &[f64]) -> Result<EnvStep> {
        if action.len() != 1 {
            return Err(Error::ShapeMismatch {
                expected: 1,
                got: action.len(),
            });
        }
        self.x = (self.x + self.gain * action[0].clamp(-1.0, 1.0)).clamp(-2.0, 2.0);
        self.t += 1;
        Ok(EnvStep {
            obs: vec![self.x],
            reward: -self.x.abs(),
            terminated: false,
            truncated: self.t >= self.horizon,
        })
    }
}
