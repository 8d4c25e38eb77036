//! Hovorka virtual patient.

mod basal;
mod model;
mod params;

pub use basal::{find_basal, glucose_after_day, open_loop_equilibrium_mgdl, steady_state, BASAL_SEARCH_MAX};
pub use model::{
    derivatives, glucose_mgdl, gut_absorption, non_insulin_flux, renal_clearance, simulate, step_rk4,
    MealEvent, PatientState, StateDerivative, FLUX_SATURATION_MMOL, MGDL_PER_MMOL, MMOL_PER_GRAM,
    RENAL_THRESHOLD_MMOL,
};
pub use params::{PatientParams, PARAMS_FILE_VERSION, S_ID, S_IE, S_IT};
