//! The five subcommands. Each writes its outputs plus `effective_config.toml`
//! into the output directory and returns a one-line JSON summary.

use std::path::Path;

use anyhow::{Context, Result};
use glycemic_core::controller::{evaluate_grid, rollout, Controller, Episode};
use glycemic_core::env::{ControllerMode, GlucoseEnv, ScenarioSpec};
use glycemic_core::fuzzy::TsParams;
use glycemic_core::td3::{run_training_episode, EpisodeStats, Td3Agent, TrainerState};
use glycemic_core::tune::{score_static, tune_static, Score};
use serde_json::{json, Value};

use crate::checkpoint::TrainingCheckpoint;
use crate::config::{evaluation_grid, resolve_scenario, tuning_grid, Case, ControllerEntry, RunConfig};
use crate::failure::{fail, Kind};
use crate::output::{
    end_name, ensure_dir, metric_fields, metric_values, num, trajectory_fields, trajectory_table, write_atomic,
    write_json, Table, METRIC_COLUMNS, NUMERIC_METRICS, TRAJECTORY_COLUMNS,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

fn template(cfg: &RunConfig, mode: ControllerMode) -> Result<GlucoseEnv> {
    let mut env_cfg = cfg.env.clone();
    env_cfg.mode = mode;
    Ok(GlucoseEnv::new(env_cfg, cfg.patient, TsParams::zeros())?)
}

fn existing(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(fail(Kind::MissingFile, format!("{what} {} does not exist", path.display())))
    }
}

/// Loads the controller for `mode` from a parameter file or a checkpoint.
pub fn load_controller(mode: ControllerMode, fuzzy: Option<&Path>, checkpoint: Option<&Path>) -> Result<Controller> {
    match mode {
        ControllerMode::StaticFuzzy => {
            let path = fuzzy.ok_or_else(|| fail(Kind::MissingFile, "static-fuzzy mode needs --fuzzy-params PATH"))?;
            existing(path, "fuzzy parameter file")?;
            let p = TsParams::load(path).with_context(|| format!("loading {}", path.display()))?;
            Ok(Controller::Static(p))
        }
        _ => {
            let path = checkpoint
                .ok_or_else(|| fail(Kind::MissingFile, format!("{} mode needs --checkpoint PATH", mode.name())))?;
            existing(path, "checkpoint")?;
            let ck = TrainingCheckpoint::load(path)?;
            if ck.mode != mode {
                return Err(fail(
                    Kind::Config,
                    format!("checkpoint {} was trained in {} mode, not {}", path.display(), ck.mode.name(), mode.name()),
                ));
            }
            ck.controller()
        }
    }
}

/// Explicit mode, else the mode stored in the checkpoint, else static fuzzy.
fn controller_mode(cfg: &RunConfig) -> Result<ControllerMode> {
    if let Some(m) = cfg.mode {
        return Ok(m);
    }
    if let (Some(ck), None) = (&cfg.checkpoint, &cfg.fuzzy_params) {
        existing(ck, "checkpoint")?;
        return Ok(TrainingCheckpoint::load(ck)?.mode);
    }
    Ok(ControllerMode::StaticFuzzy)
}

fn write_effective(cfg: &RunConfig) -> Result<()> {
    write_atomic(&cfg.out.join("effective_config.toml"), cfg.to_toml_string().as_bytes())
}

fn prepare(cfg: &mut RunConfig, mode: ControllerMode) -> Result<()> {
    cfg.mode = Some(mode);
    cfg.env.mode = mode;
    cfg.validate()?;
    ensure_dir(&cfg.out)
}

pub fn simulate(mut cfg: RunConfig) -> Result<Value> {
    let mode = controller_mode(&cfg)?;
    let scenario_name = cfg.scenario.clone().unwrap_or_else(|| "nominal".into());
    cfg.scenario = Some(scenario_name.clone());
    prepare(&mut cfg, mode)?;
    let controller = load_controller(mode, cfg.fuzzy_params.as_deref(), cfg.checkpoint.as_deref())?;
    let scenario = resolve_scenario(&scenario_name)?;
    let ep = rollout(&controller, &template(&cfg, mode)?, &scenario, cfg.seed)?;

    trajectory_table(&ep.rows).write(&cfg.out.join("trajectory.csv"))?;
    let report = json!({
        "mode": mode.name(),
        "scenario": ep.scenario,
        "seed": cfg.seed,
        "metrics": ep.metrics,
    });
    write_json(&cfg.out.join("metrics.json"), &report)?;
    write_effective(&cfg)?;
    Ok(json!({
        "command": "simulate",
        "out": cfg.out,
        "termination": end_name(ep.end()),
        "time_in_range": ep.metrics.time_in_range,
        "episode_return": ep.metrics.episode_return,
    }))
}

fn curve_table(stats: &[EpisodeStats]) -> Table {
    let mut t = Table::new(
        "learning-curve",
        ["episode", "return", "length", "termination", "critic_updates", "actor_updates"],
    );
    for s in stats {
        t.push(vec![
            s.episode.to_string(),
            num(s.episode_return),
            s.length.to_string(),
            end_name(s.end).to_string(),
            s.critic_updates.to_string(),
            s.actor_updates.to_string(),
        ]);
    }
    t
}

/// Mean return of the first and last tenth of a run (at least one episode each).
pub fn decile_means(returns: &[f64]) -> Option<(f64, f64)> {
    if returns.is_empty() {
        return None;
    }
    let k = (returns.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&returns[..k]), mean(&returns[returns.len() - k..])))
}

pub fn train(mut cfg: RunConfig) -> Result<Value> {
    let resume = match &cfg.checkpoint {
        Some(p) => {
            existing(p, "checkpoint")?;
            Some(TrainingCheckpoint::load(p)?)
        }
        None => None,
    };
    let mode = cfg.mode.or(resume.as_ref().map(|c| c.mode)).unwrap_or(ControllerMode::Direct);
    if mode == ControllerMode::StaticFuzzy {
        return Err(fail(Kind::Usage, "train needs --mode direct or adaptive-fuzzy"));
    }
    let episodes = cfg.episodes.unwrap_or_else(|| RunConfig::default_episodes(mode));
    cfg.episodes = Some(episodes);
    let scenario_name = cfg.scenario.clone().unwrap_or_else(|| "random".into());
    cfg.scenario = Some(scenario_name.clone());
    cfg.td3.obs_dim = 2;
    cfg.td3.action_dim = mode.action_dim();

    let (mut agent, mut trainer) = match resume {
        Some(ck) => {
            if ck.mode != mode {
                return Err(fail(
                    Kind::Config,
                    format!("checkpoint was trained in {} mode, not {}", ck.mode.name(), mode.name()),
                ));
            }
            // The stored agent keeps its own hyperparameters.
            cfg.td3 = ck.agent.config.clone();
            (ck.agent, ck.trainer)
        }
        None => (Td3Agent::new(cfg.td3.clone(), cfg.seed)?, TrainerState::default()),
    };
    prepare(&mut cfg, mode)?;
    write_effective(&cfg)?;

    let scenario = resolve_scenario(&scenario_name)?.with_seed(cfg.seed);
    let mut env = template(&cfg, mode)?.with_training_scenario(scenario);
    let ck_path = cfg.out.join(CHECKPOINT_FILE);
    let curve_path = cfg.out.join("learning_curve.csv");

    let mut stats = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        match run_training_episode(&mut agent, &mut env, &mut trainer) {
            Ok(s) => stats.push(s),
            Err(e) => {
                curve_table(&stats).write(&curve_path)?;
                let kept = if ck_path.exists() {
                    format!("last good checkpoint kept at {}", ck_path.display())
                } else {
                    "no checkpoint had been written yet".to_string()
                };
                return Err(anyhow::Error::new(e).context(format!(
                    "training aborted in episode {}; {kept}",
                    trainer.episodes_done
                )));
            }
        }
        if trainer.episodes_done % cfg.checkpoint_every == 0 {
            TrainingCheckpoint::save_parts(mode, trainer, &agent, &ck_path)?;
        }
    }
    TrainingCheckpoint::save_parts(mode, trainer, &agent, &ck_path)?;
    curve_table(&stats).write(&curve_path)?;

    let returns: Vec<f64> = stats.iter().map(|s| s.episode_return).collect();
    let (first, last) = decile_means(&returns).unwrap_or((f64::NAN, f64::NAN));
    let summary = json!({
        "mode": mode.name(),
        "seed": cfg.seed,
        "episodes_run": stats.len(),
        "episodes_done": trainer.episodes_done,
        "env_steps": trainer.env_steps,
        "first_decile_mean_return": first,
        "last_decile_mean_return": last,
        "terminations": stats.iter().filter(|s| s.end == glycemic_core::td3::EpisodeEnd::Terminated).count(),
        "checkpoint": CHECKPOINT_FILE,
    });
    write_json(&cfg.out.join("train_summary.json"), &summary)?;
    Ok(json!({
        "command": "train",
        "out": cfg.out,
        "episodes_done": trainer.episodes_done,
        "first_decile_mean_return": first,
        "last_decile_mean_return": last,
    }))
}

fn pairs(cases: &[Case]) -> Vec<(ScenarioSpec, u64)> {
    cases.iter().map(|c| (c.scenario.clone(), c.seed)).collect()
}

fn score_json(s: &Score) -> Value {
    json!({ "terminations": s.terminations, "mean_return": s.mean_return })
}

pub fn tune(mut cfg: RunConfig) -> Result<Value> {
    cfg.tune.seed = cfg.seed;
    let mode = ControllerMode::StaticFuzzy;
    prepare(&mut cfg, mode)?;
    let cases = tuning_grid(&cfg, "nominal")?;
    let grid = pairs(&cases);
    let start = match &cfg.fuzzy_params {
        Some(p) => {
            existing(p, "fuzzy parameter file")?;
            Some(TsParams::load(p).with_context(|| format!("loading {}", p.display()))?)
        }
        None => None,
    };
    let env = template(&cfg, mode)?;
    let result = tune_static(&env, &grid, start, &cfg.tune, cfg.execution)?;
    let midpoint = score_static(&env.config().midpoint_params(), &env, &grid, cfg.tune.rank_terminations)?;

    let params_path = cfg.out.join("static_params.txt");
    write_atomic(&params_path, result.params.to_text().as_bytes())?;
    let report = json!({
        "seed": cfg.seed,
        "cases": cases.iter().map(|c| json!({"scenario": c.scenario.name, "seed": c.seed})).collect::<Vec<_>>(),
        "score": score_json(&result.score),
        "start_score": score_json(&result.start_score),
        "midpoint_score": score_json(&midpoint),
        "evaluations": result.evaluations,
        "params": result.params.as_slice().to_vec(),
    });
    write_json(&cfg.out.join("tune_report.json"), &report)?;
    write_effective(&cfg)?;
    Ok(json!({
        "command": "tune-static",
        "out": cfg.out,
        "params": params_path,
        "terminations": result.score.terminations,
        "mean_return": result.score.mean_return,
    }))
}

fn case_fields(ep: &Episode) -> Vec<String> {
    vec![ep.scenario.clone(), ep.seed.to_string()]
}

fn summarize(eps: &[Episode]) -> Value {
    let n = eps.len().max(1) as f64;
    json!({
        "episodes": eps.len(),
        "terminations": eps.iter().filter(|e| e.end() == glycemic_core::td3::EpisodeEnd::Terminated).count(),
        "mean_return": eps.iter().map(|e| e.metrics.episode_return).sum::<f64>() / n,
        "mean_time_in_range": eps.iter().map(|e| e.metrics.time_in_range).sum::<f64>() / n,
        "mean_u_U_per_h": eps.iter().map(|e| e.metrics.mean_u_u_per_h).sum::<f64>() / n,
    })
}

pub fn evaluate(mut cfg: RunConfig) -> Result<Value> {
    let mode = controller_mode(&cfg)?;
    prepare(&mut cfg, mode)?;
    let controller = load_controller(mode, cfg.fuzzy_params.as_deref(), cfg.checkpoint.as_deref())?;
    let cases = evaluation_grid(&cfg)?;
    let eps = evaluate_grid(&controller, &template(&cfg, mode)?, &pairs(&cases), cfg.execution)?;

    let mut table = Table::new("evaluation", ["scenario", "seed"].into_iter().chain(METRIC_COLUMNS));
    let mut traj = Table::new("trajectories", ["scenario", "seed"].into_iter().chain(TRAJECTORY_COLUMNS));
    for ep in &eps {
        table.push([case_fields(ep), metric_fields(&ep.metrics)].concat());
        for r in &ep.rows {
            traj.push([case_fields(ep), trajectory_fields(r)].concat());
        }
    }
    table.write(&cfg.out.join("evaluation.csv"))?;
    traj.write(&cfg.out.join("trajectories.csv"))?;
    let summary = summarize(&eps);
    let report = json!({
        "mode": mode.name(),
        "rows": eps.iter().map(|e| json!({"scenario": e.scenario, "seed": e.seed, "metrics": e.metrics})).collect::<Vec<_>>(),
        "summary": summary,
    });
    write_json(&cfg.out.join("evaluation.json"), &report)?;
    write_effective(&cfg)?;
    Ok(json!({ "command": "evaluate", "out": cfg.out, "rows": eps.len(), "summary": summary }))
}

fn distinct_names(cases: &[Case]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for c in cases {
        if !names.contains(&c.scenario.name) {
            names.push(c.scenario.name.clone());
        }
    }
    names
}

/// Rejects entries that declare a grid other than the shared one.
pub fn check_grids(entries: &[ControllerEntry], cases: &[Case], seeds: &[u64]) -> Result<()> {
    let names = distinct_names(cases);
    for e in entries {
        if let Some(s) = &e.scenarios {
            if *s != names {
                return Err(fail(
                    Kind::GridMismatch,
                    format!("controller `{}` expects scenarios {s:?}, shared grid has {names:?}", e.name),
                ));
            }
        }
        if let Some(s) = &e.seeds {
            if s != seeds {
                return Err(fail(
                    Kind::GridMismatch,
                    format!("controller `{}` expects seeds {s:?}, shared grid has {seeds:?}", e.name),
                ));
            }
        }
    }
    Ok(())
}

pub fn compare(mut cfg: RunConfig) -> Result<Value> {
    let entries = cfg.controllers.clone();
    if entries.len() < 2 {
        return Err(fail(
            Kind::Usage,
            format!("compare needs at least 2 controllers, got {}", entries.len()),
        ));
    }
    for (i, e) in entries.iter().enumerate() {
        if entries[..i].iter().any(|o| o.name == e.name) {
            return Err(fail(Kind::Usage, format!("controller name `{}` is used twice", e.name)));
        }
    }
    let mode = cfg.mode.unwrap_or(ControllerMode::StaticFuzzy);
    prepare(&mut cfg, mode)?;
    let cases = evaluation_grid(&cfg)?;
    check_grids(&entries, &cases, &cfg.eval_seeds())?;
    let grid = pairs(&cases);
    let env = template(&cfg, mode)?;

    let mut results: Vec<(String, Vec<Episode>)> = Vec::new();
    for e in &entries {
        let c = load_controller(e.mode, e.fuzzy_params.as_deref(), e.checkpoint.as_deref())
            .with_context(|| format!("controller `{}`", e.name))?;
        results.push((e.name.clone(), evaluate_grid(&c, &env, &grid, cfg.execution)?));
    }

    let mut metrics = Table::new(
        "compare-metrics",
        ["scenario", "seed", "controller"].into_iter().chain(METRIC_COLUMNS),
    );
    let mut deltas = Table::new(
        "compare-deltas",
        ["scenario", "seed", "controller", "baseline"]
            .into_iter()
            .map(String::from)
            .chain(METRIC_COLUMNS[..NUMERIC_METRICS].iter().map(|c| format!("delta_{c}"))),
    );
    let mut traj = Table::new(
        "compare-trajectories",
        ["controller", "scenario", "seed"].into_iter().chain(TRAJECTORY_COLUMNS),
    );
    let (base_name, base_eps) = &results[0];
    for k in 0..grid.len() {
        for (name, eps) in &results {
            let ep = &eps[k];
            metrics.push([case_fields(ep), vec![name.clone()], metric_fields(&ep.metrics)].concat());
            if name != base_name {
                let b = metric_values(&base_eps[k].metrics);
                let d = metric_values(&ep.metrics).iter().zip(b).map(|(x, y)| num(x - y)).collect();
                deltas.push([case_fields(ep), vec![name.clone(), base_name.clone()], d].concat());
            }
        }
    }
    for (name, eps) in &results {
        for ep in eps {
            for r in &ep.rows {
                traj.push([vec![name.clone()], case_fields(ep), trajectory_fields(r)].concat());
            }
        }
    }
    metrics.write(&cfg.out.join("compare_metrics.csv"))?;
    deltas.write(&cfg.out.join("compare_deltas.csv"))?;
    traj.write(&cfg.out.join("compare_trajectories.csv"))?;
    let report = json!({
        "baseline": base_name,
        "grid": cases.iter().map(|c| json!({"scenario": c.scenario.name, "seed": c.seed})).collect::<Vec<_>>(),
        "controllers": results.iter().map(|(n, eps)| json!({"name": n, "summary": summarize(eps)})).collect::<Vec<_>>(),
    });
    write_json(&cfg.out.join("compare.json"), &report)?;
    write_effective(&cfg)?;
    Ok(json!({ "command": "compare", "out": cfg.out, "controllers": entries.len(), "cases": grid.len() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deciles() {
        assert_eq!(decile_means(&[]), None);
        assert_eq!(decile_means(&[1.0, 2.0, 3.0]), Some((1.0, 3.0)));
        let r: Vec<f64> = (0..150).map(f64::from).collect();
        let (a, b) = decile_means(&r).unwrap();
        assert_eq!(a, 7.0);
        assert_eq!(b, 142.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let cfg = RunConfig::default();
        let cases = evaluation_grid(&cfg).unwrap();
        let mut e = ControllerEntry::parse_flag("a=static:x").unwrap();
        check_grids(&[e.clone()], &cases, &[0]).unwrap();
        e.seeds = Some(vec![0, 1]);
        assert!(check_grids(&[e.clone()], &cases, &[0]).is_err());
        e.seeds = None;
        e.scenarios = Some(vec!["nominal".into()]);
        assert!(check_grids(&[e], &cases, &[0]).is_err());
    }
}
