use serde::{Deserialize, Serialize};

use super::reward::CloseBranch;
use crate::error::{Error, Result};
use crate::fuzzy::{FisConfig, TsParams, PARAM_COUNT};

/// Which quantity the agent's action controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// One action: the pump rate.
    Direct,
    /// 27 actions: the fuzzy consequents, re-chosen every control step.
    AdaptiveFuzzy,
    /// No action: fixed fuzzy consequents.
    StaticFuzzy,
}

impl ControllerMode {
    pub fn action_dim(self) -> usize {
        match self {
            ControllerMode::Direct => 1,
            ControllerMode::AdaptiveFuzzy => PARAM_COUNT,
            ControllerMode::StaticFuzzy => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::Direct => "direct",
            ControllerMode::AdaptiveFuzzy => "adaptive-fuzzy",
            ControllerMode::StaticFuzzy => "static-fuzzy",
        }
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "direct" => Ok(ControllerMode::Direct),
            "adaptive-fuzzy" | "adaptive" => Ok(ControllerMode::AdaptiveFuzzy),
            "static-fuzzy" | "static" => Ok(ControllerMode::StaticFuzzy),
            other => Err(Error::Parse(format!("unknown controller mode `{other}`"))),
        }
    }
}

/// Closed-loop episode settings. Glucose values in mg/dL, times in minutes,
/// insulin in mU/min.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub mode: ControllerMode,
    pub g_ref: f64,
    pub safe_band: (f64, f64),
    pub termination_bounds: (f64, f64),
    pub episode_minutes: f64,
    pub control_period: f64,
    pub integrator_dt: f64,
    pub u_max: f64,
    pub e_scale: f64,
    pub de_scale: f64,
    /// Range of every `a_r` in adaptive mode.
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    pub c_range: (f64, f64),
    pub close_branch: CloseBranch,
    /// Tolerance (mg/dL) of the basal search used at reset.
    pub basal_tol: f64,
    pub fis: FisConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            mode: ControllerMode::StaticFuzzy,
            g_ref: 90.0,
            safe_band: (70.0, 180.0),
            termination_bounds: (50.0, 300.0),
            episode_minutes: 1440.0,
            control_period: 5.0,
            integrator_dt: 1.0,
            u_max: 100.0,
            e_scale: 300.0,
            de_scale: 10.0,
            a_range: (0.0, 2.0),
            b_range: (0.0, 20.0),
            c_range: (0.0, 30.0),
            close_branch: CloseBranch::Endpoint,
            basal_tol: 0.01,
            fis: FisConfig::default(),
        }
    }
}

fn is_integer_multiple(total: f64, part: f64) -> bool {
    let n = (total / part).round();
    n >= 1.0 && (n * part - total).abs() < 1e-9 * total.max(1.0)
}

impl EnvConfig {
    pub fn with_mode(mode: ControllerMode) -> Self {
        EnvConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t_lo, t_hi) = self.termination_bounds;
        let (s_lo, s_hi) = self.safe_band;
        if !(t_lo < s_lo && s_lo < self.g_ref && self.g_ref < s_hi && s_hi < t_hi) {
            return Err(Error::invalid(
                "glucose bands",
                format!("need term_low < safe_low < g_ref < safe_high < term_high, got {t_lo} {s_lo} {} {s_hi} {t_hi}", self.g_ref),
            ));
        }
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::invalid("u_max", "must be > 0"));
        }
        if !(self.control_period > 0.0 && is_integer_multiple(self.episode_minutes, self.control_period)) {
            return Err(Error::invalid("control_period", "must divide the episode length"));
        }
        if !(self.integrator_dt > 0.0 && is_integer_multiple(self.control_period, self.integrator_dt)) {
            return Err(Error::invalid("integrator_dt", "must divide the control period"));
        }
        if !(self.e_scale > 0.0 && self.de_scale > 0.0) {
            return Err(Error::invalid("e_scale", "normalization scales must be > 0"));
        }
        for (name, (lo, hi)) in [("a_range", self.a_range), ("b_range", self.b_range), ("c_range", self.c_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(name, format!("need lo <= hi, got ({lo}, {hi})")));
            }
        }
        if !(self.basal_tol > 0.0) {
            return Err(Error::invalid("basal_tol", "must be > 0"));
        }
        self.fis.validate()
    }

    pub fn steps_per_episode(&self) -> usize {
        (self.episode_minutes / self.control_period).round() as usize
    }

    pub fn substeps(&self) -> usize {
        (self.control_period / self.integrator_dt).round() as usize
    }

    /// Per-parameter `(lo, hi)` in rule-major `(a, b, c)` order.
    pub fn param_ranges(&self) -> [(f64, f64); PARAM_COUNT] {
        let mut r = [(0.0, 0.0); PARAM_COUNT];
        for rule in 0..9 {
            r[3 * rule] = self.a_range;
            r[3 * rule + 1] = self.b_range;
            r[3 * rule + 2] = self.c_range;
        }
        r
    }

    /// Maps an action in `[-1, 1]` onto `[0, u_max]`.
    pub fn scale_action_direct(&self, a: f64) -> f64 {
        (a.clamp(-1.0, 1.0) + 1.0) / 2.0 * self.u_max
    }

    /// Maps a `[-1, 1]^27` action onto the configured parameter ranges.
    pub fn scale_action_params(&self, a: &[f64]) -> Result<TsParams> {
        if a.len() != PARAM_COUNT {
            return Err(Error::ShapeMismatch {
                expected: PARAM_COUNT,
                got: a.len(),
            });
        }
        let ranges = self.param_ranges();
        let mut v = [0.0; PARAM_COUNT];
        for ((out, x), (lo, hi)) in v.iter_mut().zip(a).zip(ranges) {
            *out = lo + (x.clamp(-1.0, 1.0) + 1.0) / 2.0 * (hi - lo);
        }
        TsParams::new(v)
    }

    /// Parameter vector at the middle of every range.
    pub fn midpoint_params(&self) -> TsParams {
        self.scale_action_params(&[0.0; PARAM_COUNT]).expect("27 finite values")
    }
}
