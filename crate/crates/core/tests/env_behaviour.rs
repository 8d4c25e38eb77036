use glycemic_core::env::*;
use glycemic_core::fuzzy::TsParams;
use glycemic_core::patient::{MealEvent, PatientParams};
use glycemic_core::Error;

fn env(mode: ControllerMode, params: TsParams) -> GlucoseEnv {
    GlucoseEnv::new(EnvConfig::with_mode(mode), PatientParams::default(), params).unwrap()
}

fn no_meals() -> ScenarioSpec {
    ScenarioSpec {
        name: "fasting".into(),
        seed: 0,
        plan: MealPlan::Fixed { meals: vec![] },
    }
}

fn one_meal(time: f64, carbs: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "single".into(),
        seed: 0,
        plan: MealPlan::Fixed {
            meals: vec![MealEvent::new(time, carbs).unwrap()],
        },
    }
}

#[test]
fn reward_peaks_at_reference_and_falls_off_on_each_side() {
    let r = |e: f64| base_reward(e, CloseBranch::Endpoint);
    assert_eq!(r(0.0), 20.0);
    let grid: Vec<f64> = (-290..=300).map(|k| k as f64).collect();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= 0.0 {
            assert!(r(a) < r(b), "{a} -> {b}");
        } else if a >= 0.0 {
            assert!(r(a) > r(b), "{a} -> {b}");
        }
        assert!(r(a) <= 20.0);
    }
}

#[test]
fn hypoglycemic_error_costs_more_than_hyperglycemic() {
    for m in 11..=290 {
        let m = m as f64;
        assert!(base_reward(-m, CloseBranch::Endpoint) < base_reward(m, CloseBranch::Endpoint), "{m}");
    }
}

#[test]
fn penalties_are_strictly_monotone() {
    for e in [-60.0, -5.0, 0.0, 3.0, 120.0] {
        let mut prev = reward(e, 0.0, 0.0, CloseBranch::Endpoint).total;
        for k in 1..50 {
            let next = reward(e, 100.0 * k as f64, 0.0, CloseBranch::Endpoint).total;
            assert!(next < prev);
            prev = next;
        }
        let mut prev = reward(e, 0.0, 0.0, CloseBranch::Endpoint).total;
        for k in 1..50 {
            let next = reward(e, 0.0, 1000.0 * k as f64, CloseBranch::Endpoint).total;
            assert!(next < prev);
            prev = next;
        }
    }
}

#[test]
fn no_insulin_lets_glucose_climb_after_a_meal() {
    let mut env = env(ControllerMode::StaticFuzzy, TsParams::zeros());
    env.reset(&one_meal(60.0, 60.0), 0).unwrap();
    let mut trace = vec![];
    loop {
        let r = env.step(&[]).unwrap();
        assert_eq!(r.info.u, 0.0);
        trace.push((r.info.time, r.info.g_mgdl));
        if r.terminated || r.truncated {
            break;
        }
    }
    let after: Vec<f64> = trace.iter().filter(|(t, _)| *t >= 70.0).map(|(_, g)| *g).collect();
    assert!(after.len() > 10);
    assert!(after.windows(2).all(|w| w[1] > w[0]), "{after:?}");
}

#[test]
fn basal_direct_action_holds_a_fasting_day_and_truncates_on_time() {
    let mut env = env(ControllerMode::Direct, TsParams::zeros());
    let a = 2.0 * env.basal_rate() / env.config().u_max - 1.0;
    env.reset(&no_meals(), 0).unwrap();
    let mut steps = 0;
    let mut logged_u = vec![];
    loop {
        let r = env.step(&[a]).unwrap();
        steps += 1;
        logged_u.push(r.info.u);
        assert!((r.info.g_mgdl - 90.0).abs() < 1.0);
        assert!(!r.terminated);
        if r.truncated {
            assert_eq!(r.info.time, 1440.0);
            break;
        }
    }
    assert_eq!(steps, 288);
    let integral: f64 = logged_u.iter().map(|u| u * env.config().control_period).sum();
    let c_acc = env.accumulators().c_acc;
    assert!(((c_acc - integral) / integral).abs() < 1e-9);
    assert!(matches!(env.step(&[a]), Err(Error::EpisodeFinished)));
}

#[test]
fn termination_is_reported_on_the_violating_step() {
    for forced in [301.0, 49.0] {
        let mut env = env(ControllerMode::StaticFuzzy, TsParams::zeros());
        env.reset(&no_meals(), 0).unwrap();
        for _ in 0..10 {
            assert!(!env.step(&[]).unwrap().terminated);
        }
        env.force_glucose(forced);
        let r = env.step(&[]).unwrap();
        assert!(r.terminated && !r.truncated, "forced {forced}");
        assert!(env.is_finished());
    }
}

#[test]
fn accumulators_restart_every_episode() {
    let mut env = env(ControllerMode::Direct, TsParams::zeros());
    env.reset(&no_meals(), 0).unwrap();
    for _ in 0..5 {
        env.step(&[0.5]).unwrap();
    }
    assert!(env.accumulators().c_acc > 0.0);
    env.reset(&no_meals(), 0).unwrap();
    assert_eq!(env.accumulators(), RewardAccumulators::default());
}

#[test]
fn meal_grams_are_logged_once_in_their_step() {
    let mut env = env(ControllerMode::StaticFuzzy, TsParams::zeros());
    env.reset(&one_meal(62.0, 40.0), 0).unwrap();
    let mut logged = vec![];
    for _ in 0..30 {
        let r = env.step(&[]).unwrap();
        if r.info.meal_g > 0.0 {
            logged.push((r.info.time, r.info.meal_g));
        }
    }
    assert_eq!(logged, vec![(65.0, 40.0)]);
}

#[test]
fn adaptive_mode_reports_the_parameters_it_used() {
    let mut env = env(ControllerMode::AdaptiveFuzzy, TsParams::zeros());
    env.reset(&no_meals(), 0).unwrap();
    let r = env.step(&[1.0; 27]).unwrap();
    let p = r.info.ts_params.unwrap();
    assert!(p.within(&env.config().param_ranges()));
    assert_eq!(p.rule(4), (2.0, 20.0, 30.0));
    assert!(env.step(&[0.0; 26]).is_err());
}
