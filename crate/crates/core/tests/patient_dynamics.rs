use glycemic_core::patient::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn insulin_absorption_matches_closed_form() {
    let p = PatientParams::default();
    let u = 16.7;
    let mut s = PatientState::default();
    for k in 0..55 {
        s = step_rk4(&s, k as f64, 1.0, u, &[], &p).unwrap();
    }
    let exact = u * p.t_max_i * (1.0 - (-55.0 / p.t_max_i).exp());
    assert!((exact - 580.6).abs() < 0.05);
    assert!(((s.s1 - exact) / exact).abs() < 1e-6, "{} vs {exact}", s.s1);
}

fn run_with_dt(dt: f64, p: &PatientParams, meals: &[MealEvent]) -> PatientState {
    let u = 6.68;
    simulate(&steady_state(u, p), 0.0, 240.0, dt, u, meals, p).unwrap()
}

fn state_error(a: &PatientState, b: &PatientState) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let p = PatientParams::default();
    // The meal starts at t = 0 so the absorption kernel stays smooth on the
    // grid, and it is small enough that glucose stays between both flux switches.
    let meals = [MealEvent::new(0.0, 15.0).unwrap()];
    let mut s = steady_state(6.68, &p);
    for k in 0..2400 {
        s = step_rk4(&s, k as f64 * 0.1, 0.1, 6.68, &meals, &p).unwrap();
        let g = s.glucose_mmol(&p);
        assert!(g > FLUX_SATURATION_MMOL && g < RENAL_THRESHOLD_MMOL, "{g}");
    }
    let reference = run_with_dt(0.01, &p, &meals);
    let e1 = state_error(&run_with_dt(8.0, &p, &meals), &reference);
    let e2 = state_error(&run_with_dt(4.0, &p, &meals), &reference);
    let e3 = state_error(&run_with_dt(2.0, &p, &meals), &reference);
    let o1 = (e1 / e2).log2();
    let o2 = (e2 / e3).log2();
    assert!(o1 >= 3.5 && o2 >= 3.5, "orders {o1} {o2} (errors {e1:e} {e2:e} {e3:e})");
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn gut_absorption_conserves_bioavailable_mass() {
    for t_max in [30.0, 40.0, 60.0] {
        let p = PatientParams {
            t_max_g: t_max,
            ..Default::default()
        };
        let meal = MealEvent::new(0.0, 50.0).unwrap();
        let total = simpson(|t| gut_absorption(t, &[meal], &p), 0.0, 1440.0, 14_400);
        let expected = meal.glucose_mmol() * p.a_g;
        assert!(((total - expected) / expected).abs() < 0.005, "t_max {t_max}: {total} vs {expected}");
    }
}

#[test]
fn meals_superpose() {
    let p = PatientParams::default();
    let a = MealEvent::new(100.0, 40.0).unwrap();
    let b = MealEvent::new(160.0, 25.0).unwrap();
    for t in [0.0, 120.0, 170.0, 400.0] {
        let both = gut_absorption(t, &[a, b], &p);
        let sum = gut_absorption(t, &[a], &p) + gut_absorption(t, &[b], &p);
        assert!((both - sum).abs() <= 1e-12 * sum.abs().max(1.0));
    }
}

#[test]
fn piecewise_fluxes_are_continuous_at_their_switches() {
    let p = PatientParams::default();
    let h = 1e-9;
    let below = non_insulin_flux(FLUX_SATURATION_MMOL - h, &p).unwrap();
    let at = non_insulin_flux(FLUX_SATURATION_MMOL, &p).unwrap();
    let above = non_insulin_flux(FLUX_SATURATION_MMOL + h, &p).unwrap();
    assert!((at - p.f01 * p.body_weight).abs() <= f64::EPSILON * at);
    assert!((below - at).abs() < 1e-9 * at && (above - at).abs() <= f64::EPSILON * at);

    assert_eq!(renal_clearance(RENAL_THRESHOLD_MMOL, &p).unwrap(), 0.0);
    assert!(renal_clearance(RENAL_THRESHOLD_MMOL + h, &p).unwrap().abs() < 1e-9);
    assert_eq!(renal_clearance(RENAL_THRESHOLD_MMOL - h, &p).unwrap(), 0.0);
}

#[test]
fn states_stay_non_negative_under_random_inputs() {
    let p = PatientParams::default();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Each compartment starts anywhere between empty and three times a
        // physiological steady-state level.
        let mut a = steady_state(rng.random_range(0.0..30.0), &p).to_array();
        for x in &mut a {
            *x *= if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) };
        }
        let mut s = PatientState::from_array(a);
        let meals: Vec<MealEvent> = (0..rng.random_range(0..4))
            .map(|_| MealEvent::new(rng.random_range(0.0..1440.0), rng.random_range(1.0..150.0)).unwrap())
            .collect();
        let mut u = 0.0;
        for k in 0..1440 {
            if k % 30 == 0 {
                u = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..100.0) };
            }
            s = step_rk4(&s, k as f64, 1.0, u, &meals, &p).unwrap();
            assert!(s.to_array().iter().all(|x| *x >= 0.0), "seed {seed} t {k}: {s:?}");
        }
    }
}

#[test]
fn more_insulin_never_raises_glucose() {
    let p = PatientParams::default();
    let s0 = steady_state(6.0, &p);
    let meals = [MealEvent::new(200.0, 60.0).unwrap()];
    let rates = [0.0, 4.0, 8.0, 16.0, 32.0];
    let mut states: Vec<PatientState> = rates.iter().map(|_| s0).collect();
    for k in 0..720 {
        for (s, u) in states.iter_mut().zip(rates) {
            *s = step_rk4(s, k as f64, 1.0, u, &meals, &p).unwrap();
        }
        let g: Vec<f64> = states.iter().map(|s| glucose_mgdl(s, &p)).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0] + 1e-9), "t {k}: {g:?}");
    }
}

#[test]
fn basal_holds_target_for_a_day() {
    let p = PatientParams::default();
    let u = find_basal(&p, 90.0, 0.01).unwrap();
    let mut s = steady_state(u, &p);
    for k in 0..1440 {
        s = step_rk4(&s, k as f64, 1.0, u, &[], &p).unwrap();
        let g = glucose_mgdl(&s, &p);
        assert!((g - 90.0).abs() <= 1.0, "t {k}: {g}");
    }
}

#[test]
fn higher_target_needs_less_basal() {
    let p = PatientParams::default();
    let low = find_basal(&p, 90.0, 0.01).unwrap();
    let high = find_basal(&p, 140.0, 0.01).unwrap();
    assert!(high < low, "{high} vs {low}");
}
