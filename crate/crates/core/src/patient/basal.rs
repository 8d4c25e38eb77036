use super::model::{glucose_mgdl, simulate, MGDL_PER_MMOL};
use super::{PatientParams, PatientState};
use crate::error::{Error, Result};

/// Upper end of the basal search bracket (mU/min).
pub const BASAL_SEARCH_MAX: f64 = 1000.0;
const DRIFT_HORIZON_MIN: f64 = 1440.0;
const DRIFT_DT_MIN: f64 = 1.0;

/// Meal-free equilibrium of the model under constant infusion `u` (mU/min).
///
/// The insulin and action compartments are linear and solved in closed form;
/// the glucose mass balance is monotone in Q1 and is solved by bisection.
pub fn steady_state(u: f64, p: &PatientParams) -> PatientState {
    let s1 = u * p.t_max_i;
    let s2 = s1;
    let i = u / (p.ke * p.insulin_volume());
    let x1 = p.kb1 / p.ka1 * i;
    let x2 = p.kb2 / p.ka2 * i;
    let x3 = p.kb3 / p.ka3 * i;
    let egp = (p.egp0 * p.body_weight * (1.0 - x3)).max(0.0);

    // Net Q1 balance once Q2 has equilibrated: strictly decreasing in Q1.
    let balance = |q1: f64| {
        let g = q1 / p.glucose_volume();
        let fc01 = super::model::non_insulin_flux(g, p).unwrap_or(0.0);
        let fr = super::model::renal_clearance(g, p).unwrap_or(0.0);
        egp - fc01 - fr - x1 * x2 * q1 / (p.k12 + x2)
    };

    let mut lo = 0.0;
    let mut hi = p.glucose_volume();
    while balance(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q1 = 0.5 * (lo + hi);
    let q2 = x1 * q1 / (p.k12 + x2);
    PatientState {
        q1,
        q2,
        s1,
        s2,
        i,
        x1,
        x2,
        x3,
    }
}

/// Glucose (mg/dL) after a meal-free day under constant `u`, started from the
/// corresponding steady state.
pub fn glucose_after_day(u: f64, p: &PatientParams) -> Result<f64> {
    let start = steady_state(u, p);
    let end = simulate(&start, 0.0, DRIFT_HORIZON_MIN, DRIFT_DT_MIN, u, &[], p)?;
    Ok(glucose_mgdl(&end, p))
}

/// Finds the constant infusion (mU/min) that holds fasting glucose at
/// `target_mgdl` to within `tol` over a day.
pub fn find_basal(p: &PatientParams, target_mgdl: f64, tol: f64) -> Result<f64> {
    p.validate()?;
    if !(target_mgdl > 50.0 && target_mgdl < 300.0) {
        return Err(Error::invalid("target_G", format!("must lie in (50, 300) mg/dL, got {target_mgdl}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be > 0, got {tol}")));
    }
    let unreachable = || Error::TargetUnreachable {
        target_mgdl,
        u_max: BASAL_SEARCH_MAX,
    };

    let mut lo = 0.0;
    let mut hi = BASAL_SEARCH_MAX;
    let f_lo = glucose_after_day(lo, p)? - target_mgdl;
    let f_hi = glucose_after_day(hi, p)? - target_mgdl;
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    // Insulin only lowers glucose: f is decreasing in u.
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(unreachable());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = glucose_after_day(mid, p)? - target_mgdl;
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(unreachable())
}

/// Zero-insulin fasting equilibrium in mg/dL.
pub fn open_loop_equilibrium_mgdl(p: &PatientParams) -> f64 {
    steady_state(0.0, p).glucose_mmol(p) * MGDL_PER_MMOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patient::derivatives;

    #[test]
    fn steady_state_has_zero_derivative() {
        let p = PatientParams::default();
        for u in [0.0, 5.0, 17.0, 60.0] {
            let s = steady_state(u, &p);
            let d = derivatives(&s, 0.0, u, &[], &p).unwrap();
            for (k, v) in d.to_array().iter().enumerate() {
                assert!(v.abs() < 1e-9, "u={u} component {k}: {v}");
            }
        }
    }

    #[test]
    fn basal_holds_target() {
        let p = PatientParams::default();
        let u = find_basal(&p, 90.0, 0.01).unwrap();
        assert!(u > 0.0);
        let g = glucose_after_day(u, &p).unwrap();
        assert!((g - 90.0).abs() <= 0.01);
    }

    #[test]
    fn higher_target_needs_less_insulin() {
        let p = PatientParams::default();
        let u90 = find_basal(&p, 90.0, 0.01).unwrap();
        let u140 = find_basal(&p, 140.0, 0.01).unwrap();
        assert!(u140 < u90);
    }

    #[test]
    fn target_above_open_loop_equilibrium_is_unreachable() {
        // Lower production so the zero-insulin equilibrium sits inside (50, 300).
        let p = PatientParams {
            egp0: 0.0105,
            ..Default::default()
        };
        let eq = open_loop_equilibrium_mgdl(&p);
        assert!(eq > 60.0 && eq < 250.0, "{eq}");
        assert!(matches!(
            find_basal(&p, eq + 20.0, 0.5),
            Err(Error::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_requests() {
        let p = PatientParams::default();
        assert!(find_basal(&p, 40.0, 1.0).is_err());
        assert!(find_basal(&p, 90.0, 0.0).is_err());
    }
}
