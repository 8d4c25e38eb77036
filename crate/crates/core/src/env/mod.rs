//! Closed-loop glucose environment: patient, controller modes, reward and
//! episode bookkeeping.

mod config;
pub mod reward;
pub mod scenario;

pub use config::{ControllerMode, EnvConfig};
pub use reward::{base_reward, reward, CloseBranch, RewardBreakdown};
pub use scenario::{
    default_windows, scenario_extreme, scenario_nominal, scenario_random, MealPlan, MealWindow, ScenarioSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{clamp_actuation, ts_output, TsParams};
use crate::patient::{find_basal, glucose_mgdl, steady_state, step_rk4, MealEvent, PatientParams, PatientState};
use crate::td3::{EnvStep, Environment};

/// Normalized glucose error and error rate, each clipped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub e_norm: f64,
    pub de_norm: f64,
}

impl Observation {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.e_norm, self.de_norm]
    }
}

/// Builds the agent's observation from two consecutive glucose samples.
pub fn observe(g: f64, g_prev: f64, dt_ctrl: f64, cfg: &EnvConfig) -> Observation {
    let e = g - cfg.g_ref;
    let de = (g - g_prev) / dt_ctrl;
    Observation {
        e_norm: (e / cfg.e_scale).clamp(-1.0, 1.0),
        de_norm: (de / cfg.de_scale).clamp(-1.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardAccumulators {
    /// integral of |normalized error| (min)
    pub i_acc: f64,
    /// integral of delivered insulin (mU)
    pub c_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// min, end of the step
    pub time: f64,
    pub g_mgdl: f64,
    /// mg/dL
    pub e: f64,
    /// mg/dL/min
    pub de: f64,
    /// delivered insulin over the step, mU/min
    pub u: f64,
    pub reward: RewardBreakdown,
    /// grams of carbohydrate whose intake falls inside this step
    pub meal_g: f64,
    /// Consequents used this step (fuzzy modes).
    pub ts_params: Option<TsParams>,
    pub coverage_gap: bool,
    pub accumulators: RewardAccumulators,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Running,
    Finished,
}

/// One virtual patient under closed-loop control.
#[derive(Debug, Clone)]
pub struct GlucoseEnv {
    cfg: EnvConfig,
    params: PatientParams,
    static_params: TsParams,
    basal: f64,
    /// Scenario used by the training interface; `reset_episode(k)` reseeds it.
    template: ScenarioSpec,
    meals: Vec<MealEvent>,
    state: PatientState,
    t: f64,
    g_prev: f64,
    acc: RewardAccumulators,
    phase: Phase,
}

impl GlucoseEnv {
    /// Validates the configuration and solves for the basal rate that holds
    /// `g_ref`; `static_params` drive the static fuzzy mode.
    pub fn new(cfg: EnvConfig, params: PatientParams, static_params: TsParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let basal = find_basal(&params, cfg.g_ref, cfg.basal_tol)?;
        Ok(GlucoseEnv {
            state: steady_state(basal, &params),
            g_prev: cfg.g_ref,
            cfg,
            params,
            static_params,
            basal,
            template: scenario_nominal(),
            meals: Vec::new(),
            t: 0.0,
            acc: RewardAccumulators::default(),
            phase: Phase::Idle,
        })
    }

    pub fn with_training_scenario(mut self, template: ScenarioSpec) -> Self {
        self.template = template;
        self
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn patient_params(&self) -> &PatientParams {
        &self.params
    }

    pub fn basal_rate(&self) -> f64 {
        self.basal
    }

    pub fn meals(&self) -> &[MealEvent] {
        &self.meals
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &PatientState {
        &self.state
    }

    pub fn accumulators(&self) -> RewardAccumulators {
        self.acc
    }

    pub fn glucose(&self) -> f64 {
        glucose_mgdl(&self.state, &self.params)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// Switches the action interpretation; takes effect at the next reset.
    pub fn set_config_mode(&mut self, mode: ControllerMode) {
        self.cfg.mode = mode;
        self.phase = Phase::Idle;
    }

    pub fn set_static_params(&mut self, p: TsParams) {
        self.static_params = p;
    }

    /// Overrides plasma glucose, leaving every other compartment untouched.
    pub fn force_glucose(&mut self, mgdl: f64) {
        self.state = self.state.with_glucose_mgdl(mgdl, &self.params);
    }

    /// Starts an episode at the basal steady state for the reference glucose.
    pub fn reset(&mut self, scenario: &ScenarioSpec, seed: u64) -> Result<Observation> {
        self.meals = scenario.with_seed(seed).meals()?;
        self.state = steady_state(self.basal, &self.params);
        self.t = 0.0;
        self.acc = RewardAccumulators::default();
        self.phase = Phase::Running;
        let g = self.glucose();
        self.g_prev = g;
        Ok(observe(g, g, self.cfg.control_period, &self.cfg))
    }

    fn resolve_insulin(&self, action: &[f64], e: f64, de: f64) -> Result<(f64, Option<TsParams>, bool)> {
        let expected = self.cfg.mode.action_dim();
        if action.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: action.len(),
            });
        }
        Ok(match self.cfg.mode {
            ControllerMode::Direct => (self.cfg.scale_action_direct(action[0]), None, false),
            ControllerMode::AdaptiveFuzzy => {
                let p = self.cfg.scale_action_params(action)?;
                let out = ts_output(e, de, &p, &self.cfg.fis);
                (clamp_actuation(out.value, self.cfg.u_max), Some(p), out.coverage_gap)
            }
            ControllerMode::StaticFuzzy => {
                let out = ts_output(e, de, &self.static_params, &self.cfg.fis);
                (
                    clamp_actuation(out.value, self.cfg.u_max),
                    Some(self.static_params),
                    out.coverage_gap,
                )
            }
        })
    }

    /// Applies `action` for one control period.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        match self.phase {
            Phase::Idle => return Err(Error::NotReset),
            Phase::Finished => return Err(Error::EpisodeFinished),
            Phase::Running => {}
        }
        let cfg = &self.cfg;
        let g_now = self.glucose();
        let e_now = g_now - cfg.g_ref;
        let de_now = (g_now - self.g_prev) / cfg.control_period;
        let (u, ts_params, coverage_gap) = self.resolve_insulin(action, e_now, de_now)?;

        let t_start = self.t;
        let (lo, hi) = cfg.termination_bounds;
        let outside = |g: f64| g > hi || g < lo;
        // The sample at the start of the period counts; at least one substep always runs.
        let mut terminated = outside(g_now);
        let mut elapsed = 0.0;
        for k in 0..cfg.substeps() {
            let t = t_start + k as f64 * cfg.integrator_dt;
            self.state = step_rk4(&self.state, t, cfg.integrator_dt, u, &self.meals, &self.params)?;
            elapsed += cfg.integrator_dt;
            if terminated || outside(glucose_mgdl(&self.state, &self.params)) {
                terminated = true;
                break;
            }
        }
        self.t = t_start + elapsed;

        let g = self.glucose();
        let obs = observe(g, g_now, elapsed, cfg);
        let e = g - cfg.g_ref;
        let de = (g - g_now) / elapsed;
        self.acc.i_acc += obs.e_norm.abs() * elapsed;
        self.acc.c_acc += u * elapsed;
        let r = reward(e, self.acc.i_acc, self.acc.c_acc, cfg.close_branch);
        let truncated = !terminated && self.t >= cfg.episode_minutes - 1e-9;
        let meal_g = self
            .meals
            .iter()
            .filter(|m| m.time >= t_start && m.time < self.t)
            .fold(0.0, |acc, m| acc + m.carbs);

        self.g_prev = g_now;
        if terminated || truncated {
            self.phase = Phase::Finished;
        }
        Ok(StepResult {
            obs,
            reward: r.total,
            terminated,
            truncated,
            info: StepInfo {
                time: self.t,
                g_mgdl: g,
                e,
                de,
                u,
                reward: r,
                meal_g,
                ts_params,
                coverage_gap,
                accumulators: self.acc,
            },
        })
    }
}

/// Seed of training episode `episode` for a scenario whose base seed is `base`.
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    base ^ episode.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Environment for GlucoseEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        self.cfg.mode.action_dim()
    }

    fn reset_episode(&mut self, episode: u64) -> Result<Vec<f64>> {
        let template = self.template.clone();
        let seed = episode_seed(template.seed, episode);
        Ok(self.reset(&template, seed)?.to_vec())
    }

    fn step_env(&mut self, action: &[f64]) -> Result<EnvStep> {
        let r = self.step(action)?;
        Ok(EnvStep {
            obs: r.obs.to_vec(),
            reward: r.reward,
            terminated: r.terminated,
            truncated: r.truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::PARAM_COUNT;

    fn env(mode: ControllerMode, params: TsParams) -> GlucoseEnv {
        GlucoseEnv::new(EnvConfig::with_mode(mode), PatientParams::default(), params).unwrap()
    }

    #[test]
    fn observation_arithmetic() {
        let cfg = EnvConfig::default();
        assert_eq!(observe(90.0, 90.0, 5.0, &cfg), Observation { e_norm: 0.0, de_norm: 0.0 });
        assert_eq!(observe(390.0, 390.0, 5.0, &cfg).e_norm, 1.0);
        assert!((observe(100.0, 90.0, 5.0, &cfg).de_norm - 0.2).abs() < 1e-15);
        assert_eq!(observe(-500.0, 400.0, 5.0, &cfg), Observation { e_norm: -1.0, de_norm: -1.0 });
    }

    #[test]
    fn reset_starts_at_reference() {
        let mut env = env(ControllerMode::StaticFuzzy, TsParams::zeros());
        let obs = env.reset(&scenario_nominal(), 0).unwrap();
        assert!(obs.e_norm.abs() < 1e-4);
        assert_eq!(obs.de_norm, 0.0);
        assert!((env.glucose() - 90.0).abs() <= 0.01);
        assert_eq!(env.accumulators(), RewardAccumulators::default());
    }

    #[test]
    fn step_before_reset_and_after_finish_fail() {
        let mut env = env(ControllerMode::Direct, TsParams::zeros());
        assert!(matches!(env.step(&[0.0]), Err(Error::NotReset)));
        env.reset(&scenario_nominal(), 0).unwrap();
        env.force_glucose(301.0);
        let r = env.step(&[-1.0]).unwrap();
        assert!(r.terminated && !r.truncated);
        assert!(matches!(env.step(&[-1.0]), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn action_dimension_mismatch_is_rejected() {
        let mut direct = env(ControllerMode::Direct, TsParams::zeros());
        direct.reset(&scenario_nominal(), 0).unwrap();
        assert!(direct.step(&[0.0, 0.0]).is_err());
        assert!(direct.step(&[]).is_err());

        let mut adaptive = env(ControllerMode::AdaptiveFuzzy, TsParams::zeros());
        adaptive.reset(&scenario_nominal(), 0).unwrap();
        assert!(adaptive.step(&[0.0; 26]).is_err());
        assert!(adaptive.step(&[0.0; PARAM_COUNT]).is_ok());

        let mut fixed = env(ControllerMode::StaticFuzzy, TsParams::zeros());
        fixed.reset(&scenario_nominal(), 0).unwrap();
        assert!(fixed.step(&[0.0]).is_err());
        assert!(fixed.step(&[]).is_ok());
    }

    #[test]
    fn hypoglycemic_forcing_terminates() {
        let mut env = env(ControllerMode::Direct, TsParams::zeros());
        env.reset(&scenario_nominal(), 0).unwrap();
        env.force_glucose(49.0);
        let r = env.step(&[1.0]).unwrap();
        assert!(r.terminated);
    }

    #[test]
    fn accumulators_follow_rectangle_rule() {
        let mut env = env(ControllerMode::Direct, TsParams::zeros());
        env.reset(&scenario_nominal(), 0).unwrap();
        let mut integral = 0.0;
        let mut last_t = 0.0;
        for k in 0..20 {
            let a = -0.8 + 0.01 * k as f64;
            let r = env.step(&[a]).unwrap();
            integral += r.info.u * (r.info.time - last_t);
            last_t = r.info.time;
            assert!(r.info.accumulators.c_acc >= 0.0);
        }
        let c = env.accumulators().c_acc;
        assert!((c - integral).abs() <= 1e-9 * integral);
    }

    #[test]
    fn adaptive_mode_reports_scaled_params() {
        let mut env = env(ControllerMode::AdaptiveFuzzy, TsParams::zeros());
        env.reset(&scenario_nominal(), 0).unwrap();
        let r = env.step(&[0.0; PARAM_COUNT]).unwrap();
        assert_eq!(r.info.ts_params.unwrap(), env.config().midpoint_params());
    }
}
