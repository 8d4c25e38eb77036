//! Run configuration: TOML file, then environment/flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use glycemic_core::env::{
    default_windows, episode_seed, scenario_extreme, scenario_random, ControllerMode, EnvConfig, ScenarioSpec,
};
use glycemic_core::par::Execution;
use glycemic_core::patient::PatientParams;
use glycemic_core::td3::Td3Config;
use glycemic_core::tune::TuneConfig;
use serde::{Deserialize, Serialize};

use crate::failure::{fail, Kind};

pub const RUN_CONFIG_VERSION: u32 = 1;

/// One controller taking part in `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerEntry {
    pub name: String,
    pub mode: ControllerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzzy_params: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Grid this controller's results are meant for; must match the shared grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

impl ControllerEntry {
    /// Parses `[NAME=]MODE:PATH`.
    pub fn parse_flag(spec: &str) -> Result<Self> {
        let (name, rest) = match spec.split_once('=') {
            Some((n, r)) => (Some(n.to_string()), r),
            None => (None, spec),
        };
        let (mode, path) = rest
            .split_once(':')
            .ok_or_else(|| fail(Kind::Usage, format!("controller `{spec}` is not of the form [NAME=]MODE:PATH")))?;
        let mode: ControllerMode = mode.parse().map_err(|e| fail(Kind::Usage, format!("{e}")))?;
        let path = PathBuf::from(path);
        let name = name.unwrap_or_else(|| format!("{}:{}", mode.name(), path.display()));
        let (fuzzy_params, checkpoint) = match mode {
            ControllerMode::StaticFuzzy => (Some(path), None),
            _ => (None, Some(path)),
        };
        Ok(ControllerEntry {
            name,
            mode,
            fuzzy_params,
            checkpoint,
            scenarios: None,
            seeds: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ControllerMode>,
    /// Built-in name (`nominal`, `random`, `extreme`) or a scenario file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    /// Training episodes; defaults depend on the mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
    pub checkpoint_every: u64,
    /// Seeds of the evaluation grid; empty means `[seed]`.
    pub eval_seeds: Vec<u64>,
    /// Randomized meal days per evaluation seed.
    pub random_cases: usize,
    pub include_extreme: bool,
    /// Random days added to the tuning set next to the main scenario.
    pub tune_random_cases: usize,
    pub execution: Execution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzzy_params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub controllers: Vec<ControllerEntry>,
    pub env: EnvConfig,
    pub td3: Td3Config,
    pub patient: PatientParams,
    pub tune: TuneConfig,
}

/// TD3 settings used for glucose control unless overridden.
pub fn glucose_td3_defaults() -> Td3Config {
    Td3Config {
        batch_size: 128,
        sigma_explore: 0.3,
        reward_scale: 0.01,
        warmup_steps: 1000,
        ..Td3Config::default()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            scenario: None,
            seed: 0,
            episodes: None,
            checkpoint_every: 25,
            eval_seeds: Vec::new(),
            random_cases: 4,
            include_extreme: true,
            tune_random_cases: 12,
            execution: Execution::default(),
            fuzzy_params: None,
            checkpoint: None,
            out: PathBuf::from("out"),
            controllers: Vec::new(),
            env: EnvConfig::default(),
            td3: glucose_td3_defaults(),
            patient: PatientParams::default(),
            tune: TuneConfig::default(),
        }
    }
}

/// Flag or environment values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub episodes: Option<u64>,
    pub mode: Option<ControllerMode>,
    pub scenario: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub fuzzy_params: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub execution: Option<Execution>,
    pub controllers: Vec<ControllerEntry>,
}

/// Overlays `top` onto `base`, descending into tables so partial sections
/// keep the remaining defaults.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| fail(Kind::Config, e.to_string()))?;
        match table.remove("version") {
            Some(toml::Value::Integer(v)) if v == i64::from(RUN_CONFIG_VERSION) => {}
            Some(v) => {
                return Err(fail(
                    Kind::Version,
                    format!("config version {v} is not supported (expected {RUN_CONFIG_VERSION})"),
                ))
            }
            None => return Err(fail(Kind::Config, "config file is missing the `version` key")),
        }
        let mut merged = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        merge(&mut merged, table);
        merged
            .try_into()
            .map_err(|e: toml::de::Error| fail(Kind::Config, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(Kind::MissingFile, format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        let body = toml::to_string(self).expect("run config serializes");
        format!("version = {RUN_CONFIG_VERSION}\n{body}")
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.episodes {
            self.episodes = Some(v);
        }
        if let Some(v) = o.mode {
            self.mode = Some(v);
        }
        if let Some(v) = o.scenario {
            self.scenario = Some(v);
        }
        if let Some(v) = o.checkpoint {
            self.checkpoint = Some(v);
        }
        if let Some(v) = o.fuzzy_params {
            self.fuzzy_params = Some(v);
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.execution {
            self.execution = v;
        }
        self.controllers.extend(o.controllers);
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.td3.validate()?;
        self.patient.validate()?;
        self.tune.validate()?;
        if self.checkpoint_every == 0 {
            return Err(fail(Kind::Config, "checkpoint_every must be >= 1"));
        }
        Ok(())
    }

    pub fn eval_seeds(&self) -> Vec<u64> {
        if self.eval_seeds.is_empty() {
            vec![self.seed]
        } else {
            self.eval_seeds.clone()
        }
    }

    pub fn default_episodes(mode: ControllerMode) -> u64 {
        match mode {
            ControllerMode::AdaptiveFuzzy => 300,
            _ => 150,
        }
    }
}

pub fn resolve_scenario(name: &str) -> Result<ScenarioSpec> {
    if let Some(s) = ScenarioSpec::builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(fail(
            Kind::MissingFile,
            format!("scenario `{name}` is neither a built-in (nominal, random, extreme) nor an existing file"),
        ));
    }
    ScenarioSpec::load(path).with_context(|| format!("loading scenario {name}"))
}

/// One row of an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

/// Randomized meal days plus the extreme day for every evaluation seed, or
/// the explicitly configured scenario for every seed.
pub fn evaluation_grid(cfg: &RunConfig) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for s in cfg.eval_seeds() {
        if let Some(name) = &cfg.scenario {
            cases.push(Case {
                scenario: resolve_scenario(name)?,
                seed: s,
            });
            continue;
        }
        for k in 0..cfg.random_cases {
            let mut scenario = scenario_random(default_windows(), 0);
            scenario.name = format!("case-{}", k + 1);
            cases.push(Case {
                scenario,
                seed: episode_seed(s, k as u64),
            });
        }
        if cfg.include_extreme {
            cases.push(Case {
                scenario: scenario_extreme(),
                seed: s,
            });
        }
    }
    Ok(cases)
}

/// Scenario named in the config (or `fallback`) plus `tune_random_cases` random days.
pub fn tuning_grid(cfg: &RunConfig, fallback: &str) -> Result<Vec<Case>> {
    let main = resolve_scenario(cfg.scenario.as_deref().unwrap_or(fallback))?;
    let mut cases = vec![Case {
        scenario: main,
        seed: cfg.seed,
    }];
    for k in 0..cfg.tune_random_cases {
        let mut scenario = scenario_random(default_windows(), 0);
        scenario.name = format!("tune-{}", k + 1);
        cases.push(Case {
            scenario,
            seed: episode_seed(cfg.seed.wrapping_add(1_000), k as u64),
        });
    }
    Ok(cases)
}
