//! Deterministic controllers and closed-loop rollouts.

use std::path::Path;

use crate::env::{ControllerMode, GlucoseEnv, Observation, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fuzzy::TsParams;
use crate::metrics::{compute_metrics, MetricsReport, TrajectoryRow};
use crate::nn::Mlp;
use crate::par::{map_ordered, Execution};
use crate::td3::{EpisodeEnd, Td3Agent};

/// A fixed policy: static consequents or a trained actor evaluated without noise.
#[derive(Debug, Clone)]
pub enum Controller {
    Static(TsParams),
    Direct(Mlp),
    Adaptive(Mlp),
}

impl Controller {
    pub fn mode(&self) -> ControllerMode {
        match self {
            Controller::Static(_) => ControllerMode::StaticFuzzy,
            Controller::Direct(_) => ControllerMode::Direct,
            Controller::Adaptive(_) => ControllerMode::AdaptiveFuzzy,
        }
    }

    /// Wraps the online actor of a trained agent.
    pub fn from_agent(mode: ControllerMode, agent: &Td3Agent) -> Result<Self> {
        let dim = agent.actor.output_dim();
        if dim != mode.action_dim() {
            return Err(Error::ShapeMismatch {
                expected: mode.action_dim(),
                got: dim,
            });
        }
        match mode {
            ControllerMode::Direct => Ok(Controller::Direct(agent.actor.clone())),
            ControllerMode::AdaptiveFuzzy => Ok(Controller::Adaptive(agent.actor.clone())),
            ControllerMode::StaticFuzzy => Err(Error::invalid("mode", "static-fuzzy has no actor")),
        }
    }

    pub fn load_checkpoint(mode: ControllerMode, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_agent(mode, &Td3Agent::load(path)?)
    }

    pub fn action(&self, obs: &Observation) -> Result<Vec<f64>> {
        match self {
            Controller::Static(_) => Ok(Vec::new()),
            Controller::Direct(net) | Controller::Adaptive(net) => {
                let mut a = net.forward(&obs.to_vec())?;
                a.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
                Ok(a)
            }
        }
    }

    /// Environment configured for this controller.
    pub fn prepare_env(&self, template: &GlucoseEnv) -> GlucoseEnv {
        let mut env = template.clone();
        env.set_config_mode(self.mode());
        if let Controller::Static(p) = self {
            env.set_static_params(*p);
        }
        env
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
    pub metrics: MetricsReport,
}

impl Episode {
    pub fn episode_return(&self) -> f64 {
        self.metrics.episode_return
    }

    pub fn end(&self) -> EpisodeEnd {
        self.metrics.termination
    }
}

/// Runs one full episode. `template` supplies the patient, its basal rate
/// and the environment settings; the controller picks the mode.
pub fn rollout(controller: &Controller, template: &GlucoseEnv, scenario: &ScenarioSpec, seed: u64) -> Result<Episode> {
    let mut env = controller.prepare_env(template);
    let mut obs = env.reset(scenario, seed)?;
    let mut rows = Vec::with_capacity(env.config().steps_per_episode());
    loop {
        let action = controller.action(&obs)?;
        let step = env.step(&action)?;
        let i = &step.info;
        rows.push(TrajectoryRow {
            time_min: i.time,
            g_mgdl: i.g_mgdl,
            e: i.e,
            de: i.de,
            u_mu_per_min: i.u,
            reward: step.reward,
            reward_base: i.reward.base,
            penalty_i: i.reward.penalty_i,
            penalty_c: i.reward.penalty_c,
            meal_g: i.meal_g,
            terminated: step.terminated,
            truncated: step.truncated,
        });
        obs = step.obs;
        if step.terminated || step.truncated {
            break;
        }
    }
    let metrics = compute_metrics(&rows, env.config());
    Ok(Episode {
        scenario: scenario.name.clone(),
        seed,
        rows,
        metrics,
    })
}

/// Rollouts over a grid of `(scenario, seed)` cases, in grid order.
pub fn evaluate_grid(
    controller: &Controller,
    template: &GlucoseEnv,
    cases: &[(ScenarioSpec, u64)],
    exec: Execution,
) -> Result<Vec<Episode>> {
    map_ordered(cases, exec, |(s, seed)| rollout(controller, template, s, *seed))
        .into_iter()
        .collect()
}

/// Mean episode return over a grid.
pub fn mean_return(
    controller: &Controller,
    template: &GlucoseEnv,
    cases: &[(ScenarioSpec, u64)],
    exec: Execution,
) -> Result<f64> {
    let eps = evaluate_grid(controller, template, cases, exec)?;
    Ok(eps.iter().map(Episode::episode_return).sum::<f64>() / eps.len().max(1) as f64)
}
