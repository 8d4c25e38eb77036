//! Type-1 Takagi-Sugeno inference with two inputs (glucose error and its rate),
//! three membership functions per input and nine affine rules.

mod membership;
mod params;

pub use membership::MembershipFunction;
pub use params::{TsParams, PARAM_COUNT, TS_PARAMS_FILE_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RULE_COUNT: usize = 9;

/// How the two antecedent degrees are combined into a firing strength.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNorm {
    #[default]
    Product,
    Min,
}

impl TNorm {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            TNorm::Product => a * b,
            TNorm::Min => a.min(b),
        }
    }
}

/// Membership functions and universe of one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisInputConfig {
    /// Low (trapezoid), zero (triangle) and high (trapezoid) sets.
    pub mfs: [MembershipFunction; 3],
    pub universe: (f64, f64),
}

impl FisInputConfig {
    pub fn new(mfs: [MembershipFunction; 3], universe: (f64, f64)) -> Result<Self> {
        let cfg = FisInputConfig { mfs, universe };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("universe", format!("need lo < hi, got ({lo}, {hi})")));
        }
        for mf in &self.mfs {
            mf.validate()?;
        }
        Ok(())
    }

    /// Degrees of the three sets at `x`. Inputs beyond the universe saturate
    /// at its bounds so the outer shoulders keep firing.
    pub fn degrees(&self, x: f64) -> [f64; 3] {
        let x = x.clamp(self.universe.0, self.universe.1);
        [self.mfs[0].degree(x), self.mfs[1].degree(x), self.mfs[2].degree(x)]
    }

    /// Shoulder/peak/shoulder layout shaped like the default error input,
    /// scaled to the symmetric universe `[-half_width, half_width]`.
    pub fn scaled_default(half_width: f64) -> Self {
        let s = half_width / 300.0;
        FisInputConfig {
            mfs: [
                MembershipFunction::trapezoid(-300.0 * s, -300.0 * s, -60.0 * s, -10.0 * s).unwrap(),
                MembershipFunction::triangle(-40.0 * s, 0.0, 40.0 * s).unwrap(),
                MembershipFunction::trapezoid(10.0 * s, 60.0 * s, 300.0 * s, 300.0 * s).unwrap(),
            ],
            universe: (-half_width, half_width),
        }
    }
}

/// Full antecedent configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisConfig {
    /// glucose error e = G - G_ref, mg/dL
    pub error: FisInputConfig,
    /// error rate, mg/dL/min
    pub rate: FisInputConfig,
    #[serde(default)]
    pub tnorm: TNorm,
}

impl Default for FisConfig {
    fn default() -> Self {
        FisConfig {
            error: FisInputConfig::scaled_default(300.0),
            rate: FisInputConfig::scaled_default(20.0),
            tnorm: TNorm::Product,
        }
    }
}

impl FisConfig {
    pub fn validate(&self) -> Result<()> {
        self.error.validate()?;
        self.rate.validate()
    }
}

/// Rule firing strengths, indexed `3 * (error set) + (rate set)`.
pub fn firing_strengths(e: f64, de: f64, cfg: &FisConfig) -> [f64; RULE_COUNT] {
    let mu_e = cfg.error.degrees(e);
    let mu_de = cfg.rate.degrees(de);
    combine_degrees(&mu_e, &mu_de, cfg.tnorm)
}

pub(crate) fn combine_degrees(mu_e: &[f64; 3], mu_de: &[f64; 3], tnorm: TNorm) -> [f64; RULE_COUNT] {
    let mut w = [0.0; RULE_COUNT];
    for (i, me) in mu_e.iter().enumerate() {
        for (j, md) in mu_de.iter().enumerate() {
            w[3 * i + j] = tnorm.combine(*me, *md);
        }
    }
    w
}

/// Consequent value `a_r e + b_r de + c_r` of every rule.
pub fn rule_outputs(e: f64, de: f64, params: &TsParams) -> [f64; RULE_COUNT] {
    let mut out = [0.0; RULE_COUNT];
    for (r, o) in out.iter_mut().enumerate() {
        let (a, b, c) = params.rule(r);
        *o = a * e + b * de + c;
    }
    out
}

/// Defuzzified controller output before actuator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsOutput {
    /// mU/min
    pub value: f64,
    /// Set when no rule fired; `value` is then 0.
    pub coverage_gap: bool,
}

/// Weighted average of the given rule outputs.
///
/// Computed as offsets from the smallest output, so equal outputs are
/// reproduced exactly and the result never leaves their range.
pub fn weighted_average(weights: &[f64; RULE_COUNT], outputs: &[f64; RULE_COUNT]) -> TsOutput {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let base = outputs.iter().cloned().fold(f64::INFINITY, f64::min);
        let top = outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let num: f64 = weights.iter().zip(outputs).map(|(w, u)| w * (u - base)).sum();
        TsOutput {
            // The final addition can round one ulp past the largest output.
            value: (base + num / total).min(top),
            coverage_gap: false,
        }
    } else {
        TsOutput {
            value: 0.0,
            coverage_gap: true,
        }
    }
}

pub fn ts_output(e: f64, de: f64, params: &TsParams, cfg: &FisConfig) -> TsOutput {
    weighted_average(&firing_strengths(e, de, cfg), &rule_outputs(e, de, params))
}

/// Pump limits: no negative infusion, nothing above `u_max`.
pub fn clamp_actuation(u: f64, u_max: f64) -> f64 {
    u.max(0.0).min(u_max)
}
