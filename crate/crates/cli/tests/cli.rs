use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glycemic_cli::checkpoint::TrainingCheckpoint;
use glycemic_core::fuzzy::TsParams;

fn shipped() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/static_params.txt")
}

fn cmd(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_glycemic"));
    c.args(args);
    for var in ["CONFIG", "SEED", "EPISODES", "MODE", "SCENARIO", "CHECKPOINT", "FUZZY_PARAMS", "OUT", "EXECUTION"] {
        c.env_remove(format!("GLYCEMIC_{var}"));
    }
    c
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = cmd(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with("error: {")).expect("machine-readable error line");
    serde_json::from_str(line.strip_prefix("error: ").unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a versioned CSV (skips the version comment and the header).
fn rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn header(p: &Path) -> Vec<String> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn simulate_writes_csv_metrics_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let summary = ok(&["simulate", "--fuzzy-params", s(&shipped()), "--out", s(&out)]);
    assert_eq!(summary["termination"], "truncated");
    let first = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(first.starts_with("# glycemic-trajectory v1\ntime_min,G_mgdl,e,de,u_mU_per_min,"));
    assert_eq!(rows(&out.join("trajectory.csv")).len(), 288);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["version"], 1);
    let echoed = std::fs::read_to_string(out.join("effective_config.toml")).unwrap();
    let cfg = glycemic_cli::config::RunConfig::from_toml_str(&echoed).unwrap();
    assert_eq!(cfg.scenario.as_deref(), Some("nominal"));
    assert_eq!(cfg.td3.batch_size, 128);
}

#[test]
fn missing_artifacts_fail_with_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd(&["simulate", "--out", s(dir.path())]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["kind"], "missing-file");

    let out = cmd(&["evaluate", "--mode", "direct", "--checkpoint", "/no/such.json", "--out", s(dir.path())])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let e = error_json(&out);
    assert_eq!(e["kind"], "missing-file");
    assert!(e["message"].as_str().unwrap().contains("/no/such.json"));

    let out = cmd(&["simulate", "--mode", "pid"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["kind"], "usage");

    let out = cmd(&["train", "--mode", "static"]).output().unwrap();
    assert_eq!(error_json(&out)["kind"], "usage");
}

#[test]
fn bad_config_versions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "version = 9\n").unwrap();
    let out = cmd(&["simulate", "--config", s(&cfg)]).output().unwrap();
    assert_eq!(error_json(&out)["kind"], "version");
    std::fs::write(&cfg, "version = 1\nunknown_key = 3\n").unwrap();
    let out = cmd(&["simulate", "--config", s(&cfg)]).output().unwrap();
    assert_eq!(error_json(&out)["kind"], "config");
}

#[test]
fn environment_variables_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let from_file = dir.path().join("file-out");
    std::fs::write(&cfg, format!("version = 1\nscenario = \"extreme\"\nout = {:?}\n", s(&from_file))).unwrap();
    let from_env = dir.path().join("env-out");
    let out = cmd(&["simulate"])
        .env("GLYCEMIC_CONFIG", s(&cfg))
        .env("GLYCEMIC_FUZZY_PARAMS", s(&shipped()))
        .env("GLYCEMIC_OUT", s(&from_env))
        .env("GLYCEMIC_SCENARIO", "nominal")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!from_file.exists());
    let echoed = std::fs::read_to_string(from_env.join("effective_config.toml")).unwrap();
    assert!(echoed.contains("scenario = \"nominal\""));

    // A flag beats the environment.
    let flag_out = dir.path().join("flag-out");
    let out = cmd(&["simulate", "--out", s(&flag_out)])
        .env("GLYCEMIC_FUZZY_PARAMS", s(&shipped()))
        .env("GLYCEMIC_OUT", s(&from_env.join("unused")))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_out.join("trajectory.csv").exists());
}

#[test]
fn scenario_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("day.toml");
    std::fs::write(
        &path,
        "version = 1\nname = \"two-meals\"\nseed = 0\nkind = \"fixed\"\n\n[[meals]]\ntime = 420.0\ncarbs = 50.0\n\n[[meals]]\ntime = 900.0\ncarbs = 30.0\n",
    )
    .unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--fuzzy-params", s(&shipped()), "--scenario", s(&path), "--out", s(&out)]);
    // Meal carbs appear on the row that closes their control period.
    let meals: Vec<String> = rows(&out.join("trajectory.csv"))
        .into_iter()
        .filter(|r| r[9] != "0.0")
        .map(|r| format!("{}:{}", r[0], r[9]))
        .collect();
    assert_eq!(meals, vec!["425.0:50.0", "905.0:30.0"]);
}

#[test]
fn learning_curve_rows_match_episodes_and_resume_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (full, head, tail) = (d.join("full"), d.join("head"), d.join("tail"));
    ok(&["train", "--mode", "direct", "--seed", "7", "--episodes", "8", "--out", s(&full)]);
    ok(&["train", "--mode", "direct", "--seed", "7", "--episodes", "5", "--out", s(&head)]);
    let ck = head.join("checkpoint.json");
    ok(&["train", "--seed", "7", "--episodes", "3", "--checkpoint", s(&ck), "--out", s(&tail)]);

    let full_rows = rows(&full.join("learning_curve.csv"));
    assert_eq!(full_rows.len(), 8);
    let mut joined = rows(&head.join("learning_curve.csv"));
    joined.extend(rows(&tail.join("learning_curve.csv")));
    assert_eq!(joined, full_rows);
    assert_eq!(
        std::fs::read(full.join("checkpoint.json")).unwrap(),
        std::fs::read(tail.join("checkpoint.json")).unwrap()
    );
    let ck = TrainingCheckpoint::load(&tail.join("checkpoint.json")).unwrap();
    assert_eq!(ck.trainer.episodes_done, 8);
}

#[test]
fn non_finite_losses_keep_the_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "version = 1\ncheckpoint_every = 1\n[td3]\nwarmup_steps = 128\nlr_critic = 1e150\nlr_actor = 1e150\n",
    )
    .unwrap();
    let out_dir = dir.path().join("t");
    let out = cmd(&["train", "--config", s(&cfg), "--episodes", "20", "--out", s(&out_dir)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["kind"], "numerical");
    let ck = TrainingCheckpoint::load(&out_dir.join("checkpoint.json")).unwrap();
    let done = rows(&out_dir.join("learning_curve.csv")).len() as u64;
    assert!((1..20).contains(&done));
    assert_eq!(ck.trainer.episodes_done, done);
    assert!(ck.agent.actor.is_finite() && ck.agent.critic1.is_finite());
}

#[test]
fn tune_static_output_round_trips_and_is_elitist() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "version = 1\ntune_random_cases = 1\n[tune]\nrandom_candidates = 4\nrefine_iterations = 2\n",
    )
    .unwrap();
    let out = dir.path().join("tune");
    ok(&["tune-static", "--config", s(&cfg), "--out", s(&out)]);
    let p = TsParams::load(out.join("static_params.txt")).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tune_report.json")).unwrap()).unwrap();
    let listed: Vec<f64> = report["params"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(p.as_slice().to_vec(), listed);
    let (best, start) = (&report["score"], &report["start_score"]);
    let (bt, st) = (best["terminations"].as_u64().unwrap(), start["terminations"].as_u64().unwrap());
    assert!(bt < st || (bt == st && best["mean_return"].as_f64() >= start["mean_return"].as_f64()));
}

#[test]
fn evaluate_reports_one_row_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "version = 1\ninclude_extreme = false\n").unwrap();
    let out = dir.path().join("ev");
    ok(&["evaluate", "--config", s(&cfg), "--fuzzy-params", s(&shipped()), "--out", s(&out)]);
    let r = rows(&out.join("evaluation.csv"));
    assert_eq!(r.len(), 4);
    assert_eq!(r.iter().map(|x| x[0].as_str()).collect::<Vec<_>>(), ["case-1", "case-2", "case-3", "case-4"]);
}

#[test]
fn compare_with_itself_gives_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let a = format!("a=static:{}", s(&shipped()));
    let b = format!("b=static:{}", s(&shipped()));
    ok(&["compare", "--controller", &a, "--controller", &b, "--out", s(&out)]);
    let deltas = rows(&out.join("compare_deltas.csv"));
    assert_eq!(deltas.len(), 5);
    for r in &deltas {
        assert!(r[4..].iter().all(|v| v == "0.0"), "{r:?}");
    }
    let h = header(&out.join("compare_metrics.csv"));
    assert!(h.contains(&"undershoot_below_ref".to_string()) && h.contains(&"overshoot_above_high".to_string()));
    let m = rows(&out.join("compare_metrics.csv"));
    let extreme: Vec<&Vec<String>> = m.iter().filter(|r| r[0] == "extreme").collect();
    assert_eq!(extreme.iter().map(|r| r[2].as_str()).collect::<Vec<_>>(), ["a", "b"]);
    let traj = rows(&out.join("compare_trajectories.csv"));
    assert!(traj.iter().any(|r| r[0] == "a") && traj.iter().any(|r| r[0] == "b"));
}

#[test]
fn compare_rejects_mismatched_grids_and_single_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let p = s(&shipped()).to_string();
    std::fs::write(
        &cfg,
        format!(
            "version = 1\n\n[[controllers]]\nname = \"a\"\nmode = \"static-fuzzy\"\nfuzzy_params = {p:?}\n\n\
             [[controllers]]\nname = \"b\"\nmode = \"static-fuzzy\"\nfuzzy_params = {p:?}\nseeds = [0, 1]\n"
        ),
    )
    .unwrap();
    let out = cmd(&["compare", "--config", s(&cfg), "--out", s(dir.path())]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["kind"], "grid-mismatch");

    let one = format!("a=static:{p}");
    let out = cmd(&["compare", "--controller", &one, "--out", s(dir.path())]).output().unwrap();
    assert_eq!(error_json(&out)["kind"], "usage");
}

#[test]
fn parallel_and_sequential_evaluation_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("seq"), dir.path().join("par"));
    let fp = shipped();
    ok(&["evaluate", "--fuzzy-params", s(&fp), "--execution", "sequential", "--out", s(&a)]);
    ok(&["evaluate", "--fuzzy-params", s(&fp), "--execution", "parallel", "--out", s(&b)]);
    for f in ["evaluation.csv", "evaluation.json", "trajectories.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
