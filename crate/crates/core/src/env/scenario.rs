use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patient::MealEvent;

pub const SCENARIO_FILE_VERSION: u32 = 1;
pub const DAY_MINUTES: f64 = 1440.0;

/// Window from which one meal is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MealWindow {
    /// min, inclusive
    pub start: f64,
    /// min, exclusive
    pub end: f64,
    /// g
    pub carbs_min: f64,
    /// g
    pub carbs_max: f64,
    /// Chance that the meal happens at all.
    #[serde(default = "one")]
    pub probability: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MealPlan {
    Fixed { meals: Vec<MealEvent> },
    Random { windows: Vec<MealWindow> },
}

/// A named meal schedule, either explicit or drawn from windows with `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    #[serde(flatten)]
    pub plan: MealPlan,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u32,
    #[serde(flatten)]
    scenario: ScenarioSpec,
}

impl MealWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.start < self.end && self.end <= DAY_MINUTES) {
            return Err(Error::invalid(
                "window",
                format!("need 0 <= start < end <= {DAY_MINUTES}, got [{}, {})", self.start, self.end),
            ));
        }
        if !(self.carbs_min > 0.0 && self.carbs_min <= self.carbs_max && self.carbs_max.is_finite()) {
            return Err(Error::invalid(
                "window",
                format!("need 0 < carbs_min <= carbs_max, got [{}, {}]", self.carbs_min, self.carbs_max),
            ));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::invalid("window.probability", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Breakfast, lunch and dinner windows plus an afternoon snack that happens half the time.
pub fn default_windows() -> Vec<MealWindow> {
    let h = 60.0;
    vec![
        MealWindow { start: 6.0 * h, end: 9.0 * h, carbs_min: 30.0, carbs_max: 60.0, probability: 1.0 },
        MealWindow { start: 12.0 * h, end: 14.0 * h, carbs_min: 50.0, carbs_max: 90.0, probability: 1.0 },
        MealWindow { start: 18.0 * h, end: 21.0 * h, carbs_min: 40.0, carbs_max: 80.0, probability: 1.0 },
        MealWindow { start: 15.5 * h, end: 17.0 * h, carbs_min: 10.0, carbs_max: 25.0, probability: 0.5 },
    ]
}

/// Three meals: 08:00 45 g, 13:00 70 g, 19:00 60 g.
pub fn scenario_nominal() -> ScenarioSpec {
    ScenarioSpec {
        name: "nominal".into(),
        seed: 0,
        plan: MealPlan::Fixed {
            meals: vec![
                MealEvent { time: 480.0, carbs: 45.0 },
                MealEvent { time: 780.0, carbs: 70.0 },
                MealEvent { time: 1140.0, carbs: 60.0 },
            ],
        },
    }
}

pub fn scenario_random(windows: Vec<MealWindow>, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        name: format!("random-{seed}"),
        seed,
        plan: MealPlan::Random { windows },
    }
}

/// Nominal breakfast followed by a 150 g lunch at 12:00.
pub fn scenario_extreme() -> ScenarioSpec {
    ScenarioSpec {
        name: "extreme".into(),
        seed: 0,
        plan: MealPlan::Fixed {
            meals: vec![MealEvent { time: 480.0, carbs: 45.0 }, MealEvent { time: 720.0, carbs: 150.0 }],
        },
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.plan {
            MealPlan::Fixed { meals } => {
                for m in meals {
                    MealEvent::new(m.time, m.carbs)?;
                    if m.time >= DAY_MINUTES {
                        return Err(Error::invalid("meal.time", format!("must be < {DAY_MINUTES}, got {}", m.time)));
                    }
                }
            }
            MealPlan::Random { windows } => {
                for w in windows {
                    w.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Concrete meals, sorted by time. Random plans draw from `self.seed`.
    pub fn meals(&self) -> Result<Vec<MealEvent>> {
        self.validate()?;
        let mut meals = match &self.plan {
            MealPlan::Fixed { meals } => meals.clone(),
            MealPlan::Random { windows } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut out = Vec::with_capacity(windows.len());
                for w in windows {
                    let time = rng.random_range(w.start..w.end);
                    let carbs = if w.carbs_max > w.carbs_min {
                        rng.random_range(w.carbs_min..=w.carbs_max)
                    } else {
                        w.carbs_min
                    };
                    let happens = rng.random::<f64>() < w.probability;
                    if happens {
                        out.push(MealEvent::new(time, carbs)?);
                    }
                }
                out
            }
        };
        meals.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(meals)
    }

    /// Same plan, different draw.
    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.version != SCENARIO_FILE_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: SCENARIO_FILE_VERSION,
            });
        }
        file.scenario.validate()?;
        Ok(file.scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile {
            version: SCENARIO_FILE_VERSION,
            scenario: self.clone(),
        })
        .expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Built-in scenario by name: `nominal`, `extreme` or `random` (default windows, seed 0).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "nominal" => Some(scenario_nominal()),
            "extreme" => Some(scenario_extreme()),
            "random" => Some(scenario_random(default_windows(), 0)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_has_three_meals() {
        let meals = scenario_nominal().meals().unwrap();
        assert_eq!(meals.len(), 3);
        assert_eq!(meals.iter().map(|m| m.time).collect::<Vec<_>>(), vec![480.0, 780.0, 1140.0]);
    }

    #[test]
    fn extreme_has_large_lunch() {
        let meals = scenario_extreme().meals().unwrap();
        assert_eq!(meals[1], MealEvent { time: 720.0, carbs: 150.0 });
    }

    #[test]
    fn random_is_seeded() {
        let a = scenario_random(default_windows(), 11).meals().unwrap();
        let b = scenario_random(default_windows(), 11).meals().unwrap();
        assert_eq!(a, b);
        let c = scenario_random(default_windows(), 12).meals().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_meals_stay_in_windows() {
        let windows = default_windows();
        for seed in 0..1000 {
            let meals = scenario_random(windows.clone(), seed).meals().unwrap();
            assert!(meals.len() >= 3);
            for m in &meals {
                let inside = windows.iter().any(|w| {
                    m.time >= w.start && m.time < w.end && m.carbs >= w.carbs_min && m.carbs <= w.carbs_max
                });
                assert!(inside, "seed {seed}: {m:?}");
                assert!(m.time >= 0.0 && m.time < DAY_MINUTES && m.carbs > 0.0);
            }
        }
    }

    #[test]
    fn toml_round_trip() {
        for s in [scenario_nominal(), scenario_random(default_windows(), 5)] {
            let text = s.to_toml_string();
            assert_eq!(ScenarioSpec::from_toml_str(&text).unwrap(), s);
        }
    }

    #[test]
    fn rejects_bad_files() {
        let bad_window = "version = 1\nname = \"x\"\nseed = 0\nkind = \"random\"\n\
            [[windows]]\nstart = 100.0\nend = 50.0\ncarbs_min = 10.0\ncarbs_max = 20.0\n";
        assert!(ScenarioSpec::from_toml_str(bad_window).is_err());
        let late_meal = "version = 1\nname = \"x\"\nseed = 0\nkind = \"fixed\"\n\
            [[meals]]\ntime = 1500.0\ncarbs = 20.0\n";
        assert!(ScenarioSpec::from_toml_str(late_meal).is_err());
        let text = scenario_nominal().to_toml_string().replace("version = 1", "version = 4");
        assert!(ScenarioSpec::from_toml_str(&text).is_err());
    }
}
