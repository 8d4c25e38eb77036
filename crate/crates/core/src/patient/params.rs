use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current version of the patient parameter file.
pub const PARAMS_FILE_VERSION: u32 = 1;

/// Hovorka model constants.
///
/// Rates are per minute, volumes per kilogram of body weight and the two
/// production terms (`egp0`, `f01`) in mmol/kg/min. The defaults are the
/// commonly used literature values for a 70 kg adult; they are a starting
/// point, not a fitted patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatientParams {
    /// kg
    pub body_weight: f64,
    pub k12: f64,
    pub ka1: f64,
    pub ka2: f64,
    pub ka3: f64,
    /// 1/min per mU/L
    pub kb1: f64,
    pub kb2: f64,
    pub kb3: f64,
    pub ke: f64,
    /// L/kg
    pub v_i: f64,
    /// L/kg
    pub v_g: f64,
    /// carbohydrate bioavailability, (0, 1]
    pub a_g: f64,
    /// min
    pub t_max_g: f64,
    /// min
    pub t_max_i: f64,
    /// mmol/kg/min
    pub egp0: f64,
    /// mmol/kg/min
    pub f01: f64,
}

/// Insulin sensitivities used to derive the activation rates `kb_i = ka_i * S_i`.
pub const S_IT: f64 = 51.2e-4;
pub const S_ID: f64 = 8.2e-4;
pub const S_IE: f64 = 520e-4;

impl Default for PatientParams {
    fn default() -> Self {
        let (ka1, ka2, ka3) = (0.006, 0.06, 0.03);
        PatientParams {
            body_weight: 70.0,
            k12: 0.066,
            ka1,
            ka2,
            ka3,
            kb1: ka1 * S_IT,
            kb2: ka2 * S_ID,
            kb3: ka3 * S_IE,
            ke: 0.138,
            v_i: 0.12,
            v_g: 0.16,
            a_g: 0.8,
            t_max_g: 40.0,
            t_max_i: 55.0,
            egp0: 0.0161,
            f01: 0.0097,
        }
    }
}


impl PatientParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 16] = [
            ("body_weight", self.body_weight),
            ("k12", self.k12),
            ("ka1", self.ka1),
            ("ka2", self.ka2),
            ("ka3", self.ka3),
            ("kb1", self.kb1),
            ("kb2", self.kb2),
            ("kb3", self.kb3),
            ("ke", self.ke),
            ("v_i", self.v_i),
            ("v_g", self.v_g),
            ("a_g", self.a_g),
            ("t_max_g", self.t_max_g),
            ("t_max_i", self.t_max_i),
            ("egp0", self.egp0),
            ("f01", self.f01),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if self.a_g > 1.0 {
            return Err(Error::invalid("a_g", format!("must lie in (0, 1], got {}", self.a_g)));
        }
        Ok(())
    }

    /// Glucose distribution volume in litres.
    pub fn glucose_volume(&self) -> f64 {
        self.v_g * self.body_weight
    }

    /// Insulin distribution volume in litres.
    pub fn insulin_volume(&self) -> f64 {
        self.v_i * self.body_weight
    }

    /// Parses the key-value (TOML) parameter file. Missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let version = match table.remove("version") {
            Some(toml::Value::Integer(v)) => v,
            Some(other) => return Err(Error::Parse(format!("`version` must be an integer, got {other}"))),
            None => return Err(Error::Parse("missing `version` key".into())),
        };
        if version != i64::from(PARAMS_FILE_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: PARAMS_FILE_VERSION,
            });
        }
        let params: PatientParams = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> String {
        let body = toml::to_string(self).expect("patient params always serialize");
        format!("version = {PARAMS_FILE_VERSION}\n{body}")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
