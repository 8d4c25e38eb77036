//! Right-hand side of the Hovorka glucose-insulin model and its fixed-step
//! RK4 integrator.

use serde::{Deserialize, Serialize};

use super::PatientParams;
use crate::error::{ensure_finite, Error, Result};

/// mmol of glucose per gram of carbohydrate.
pub const MMOL_PER_GRAM: f64 = 5.551;
/// mg/dL per mmol/L of glucose.
pub const MGDL_PER_MMOL: f64 = 18.018;

/// Glucose concentration below which the non-insulin-dependent flux falls off linearly (mmol/L).
pub const FLUX_SATURATION_MMOL: f64 = 4.5;
/// Renal threshold (mmol/L).
pub const RENAL_THRESHOLD_MMOL: f64 = 9.0;
const RENAL_RATE: f64 = 0.003;

/// The eight Hovorka state variables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PatientState {
    /// accessible glucose mass (mmol)
    pub q1: f64,
    /// non-accessible glucose mass (mmol)
    pub q2: f64,
    /// subcutaneous insulin, first compartment (mU)
    pub s1: f64,
    /// subcutaneous insulin, second compartment (mU)
    pub s2: f64,
    /// plasma insulin concentration (mU/L)
    pub i: f64,
    /// insulin action on transport (1/min)
    pub x1: f64,
    /// insulin action on disposal (1/min)
    pub x2: f64,
    /// insulin action on endogenous production (dimensionless)
    pub x3: f64,
}

/// Time derivative of every [`PatientState`] field, per minute.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateDerivative {
    pub q1: f64,
    pub q2: f64,
    pub s1: f64,
    pub s2: f64,
    pub i: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl PatientState {
    pub fn to_array(self) -> [f64; 8] {
        [self.q1, self.q2, self.s1, self.s2, self.i, self.x1, self.x2, self.x3]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        PatientState {
            q1: a[0],
            q2: a[1],
            s1: a[2],
            s2: a[3],
            i: a[4],
            x1: a[5],
            x2: a[6],
            x3: a[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Plasma glucose concentration in mmol/L.
    pub fn glucose_mmol(&self, p: &PatientParams) -> f64 {
        self.q1 / p.glucose_volume()
    }

    /// Replaces the accessible glucose mass so that plasma glucose reads `mgdl`.
    pub fn with_glucose_mgdl(mut self, mgdl: f64, p: &PatientParams) -> Self {
        self.q1 = mgdl / MGDL_PER_MMOL * p.glucose_volume();
        self
    }
}

impl StateDerivative {
    pub fn to_array(self) -> [f64; 8] {
        [self.q1, self.q2, self.s1, self.s2, self.i, self.x1, self.x2, self.x3]
    }
}

/// A carbohydrate intake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealEvent {
    /// min since the start of the simulation
    pub time: f64,
    /// g
    pub carbs: f64,
}

impl MealEvent {
    pub fn new(time: f64, carbs: f64) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::invalid("meal.time", format!("must be >= 0, got {time}")));
        }
        if !(carbs.is_finite() && carbs > 0.0) {
            return Err(Error::invalid("meal.carbs", format!("must be > 0, got {carbs}")));
        }
        Ok(MealEvent { time, carbs })
    }

    pub fn glucose_mmol(&self) -> f64 {
        self.carbs * MMOL_PER_GRAM
    }
}

fn flux_unchecked(g: f64, p: &PatientParams) -> f64 {
    let f01 = p.f01 * p.body_weight;
    if g >= FLUX_SATURATION_MMOL {
        f01
    } else {
        f01 * g / FLUX_SATURATION_MMOL
    }
}

fn renal_unchecked(g: f64, p: &PatientParams) -> f64 {
    if g > RENAL_THRESHOLD_MMOL {
        RENAL_RATE * (g - RENAL_THRESHOLD_MMOL) * p.glucose_volume()
    } else {
        0.0
    }
}

/// Non-insulin-dependent glucose flux (mmol/min) at concentration `g` (mmol/L).
pub fn non_insulin_flux(g: f64, p: &PatientParams) -> Result<f64> {
    ensure_finite(g, "glucose concentration")?;
    Ok(flux_unchecked(g, p))
}

/// Renal glucose clearance (mmol/min) at concentration `g` (mmol/L).
pub fn renal_clearance(g: f64, p: &PatientParams) -> Result<f64> {
    ensure_finite(g, "glucose concentration")?;
    Ok(renal_unchecked(g, p))
}

/// Rate of glucose appearance from the gut (mmol/min). Meals superpose.
pub fn gut_absorption(t: f64, meals: &[MealEvent], p: &PatientParams) -> f64 {
    let tmax = p.t_max_g;
    meals
        .iter()
        .filter(|m| m.time <= t)
        .map(|m| {
            let tau = t - m.time;
            m.glucose_mmol() * p.a_g * tau * (-tau / tmax).exp() / (tmax * tmax)
        })
        .sum()
}

fn derivatives_unchecked(
    s: &PatientState,
    t: f64,
    u: f64,
    meals: &[MealEvent],
    p: &PatientParams,
) -> StateDerivative {
    let g = s.glucose_mmol(p);
    let fc01 = flux_unchecked(g, p);
    let fr = renal_unchecked(g, p);
    let ug = gut_absorption(t, meals, p);
    let egp = (p.egp0 * p.body_weight * (1.0 - s.x3)).max(0.0);
    // (Fc01 / (V_G G)) * Q1 reduces to Fc01, which stays defined at G = 0.
    let u_i = s.s2 / p.t_max_i;

    StateDerivative {
        q1: -fc01 - s.x1 * s.q1 + p.k12 * s.q2 - fr + ug + egp,
        q2: s.x1 * s.q1 - (p.k12 + s.x2) * s.q2,
        s1: u - s.s1 / p.t_max_i,
        s2: (s.s1 - s.s2) / p.t_max_i,
        i: u_i / p.insulin_volume() - p.ke * s.i,
        x1: -p.ka1 * s.x1 + p.kb1 * s.i,
        x2: -p.ka2 * s.x2 + p.kb2 * s.i,
        x3: -p.ka3 * s.x3 + p.kb3 * s.i,
    }
}

/// Evaluates the full model right-hand side with insulin infusion `u` (mU/min).
pub fn derivatives(
    s: &PatientState,
    t: f64,
    u: f64,
    meals: &[MealEvent],
    p: &PatientParams,
) -> Result<StateDerivative> {
    if !s.is_finite() {
        return Err(Error::NonFinite("patient state"));
    }
    ensure_finite(u, "insulin infusion")?;
    if u < 0.0 {
        return Err(Error::invalid("u", format!("insulin infusion must be >= 0, got {u}")));
    }
    Ok(derivatives_unchecked(s, t, u, meals, p))
}

fn axpy(base: &[f64; 8], k: &[f64; 8], h: f64) -> PatientState {
    let mut out = [0.0; 8];
    for ((o, b), d) in out.iter_mut().zip(base).zip(k) {
        *o = b + h * d;
    }
    PatientState::from_array(out)
}

/// One classical Runge-Kutta step of length `dt` with `u` held constant.
/// Negative components are floored at zero afterwards.
pub fn step_rk4(
    s: &PatientState,
    t: f64,
    dt: f64,
    u: f64,
    meals: &[MealEvent],
    p: &PatientParams,
) -> Result<PatientState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let k1 = derivatives(s, t, u, meals, p)?.to_array();
    let y = s.to_array();
    let k2 = derivatives_unchecked(&axpy(&y, &k1, dt / 2.0), t + dt / 2.0, u, meals, p).to_array();
    let k3 = derivatives_unchecked(&axpy(&y, &k2, dt / 2.0), t + dt / 2.0, u, meals, p).to_array();
    let k4 = derivatives_unchecked(&axpy(&y, &k3, dt), t + dt, u, meals, p).to_array();

    let mut next = [0.0; 8];
    for j in 0..8 {
        next[j] = (y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).max(0.0);
    }
    let next = PatientState::from_array(next);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::IntegrationFailure {
            time: t + dt,
            state: next,
        })
    }
}

/// Integrates from `t0` to `t0 + duration` in steps of `dt` under constant `u`.
pub fn simulate(
    s: &PatientState,
    t0: f64,
    duration: f64,
    dt: f64,
    u: f64,
    meals: &[MealEvent],
    p: &PatientParams,
) -> Result<PatientState> {
    let steps = (duration / dt).round() as usize;
    let mut state = *s;
    for k in 0..steps {
        state = step_rk4(&state, t0 + k as f64 * dt, dt, u, meals, p)?;
    }
    Ok(state)
}

/// Plasma glucose in mg/dL.
pub fn glucose_mgdl(s: &PatientState, p: &PatientParams) -> f64 {
    s.glucose_mmol(p) * MGDL_PER_MMOL
}
