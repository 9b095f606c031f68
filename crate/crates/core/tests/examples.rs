//! Runs every example and checks its headline numbers.

#![allow(dead_code)]

#[path = "../examples/ideal_sensor.rs"]
mod ideal_sensor;
#[path = "../examples/loss_tuning.rs"]
mod loss_tuning;
#[path = "../examples/scenario_sweep.rs"]
mod scenario_sweep;
#[path = "../examples/stability_bounds.rs"]
mod stability_bounds;
#[path = "../examples/beyond_linear.rs"]
mod beyond_linear;
#[path = "../examples/oracle_checks.rs"]
mod oracle_checks;
#[path = "../examples/monte_carlo_noise.rs"]
mod monte_carlo_noise;

#[test]
fn ideal_sensor_matches_closed_form() {
    for (a, got, exact) in ideal_sensor::run_example().unwrap() {
        assert!((got - exact).abs() < 1e-9 * exact.abs().max(1.0), "A = {a}");
    }
}

#[test]
fn loss_tuning_restores_ideal() {
    let s = loss_tuning::run_example().unwrap();
    assert!(s.ideal - s.z1 > 2.0);
    assert!((s.repaired - s.ideal).abs() < 1e-8 * s.ideal);
    assert!((s.repaired_balanced - s.ideal).abs() < 1e-8 * s.ideal);
}

#[test]
fn scenario_sweep_ordering() {
    let rows = scenario_sweep::run_example().unwrap();
    let (a, v) = rows.iter().find(|(a, _)| (*a - 4.5).abs() < 1e-12).unwrap();
    let [ideal, z1, z2, tuned] = v.map(|x| x.unwrap());
    assert!(ideal > z2 && z2 > z1, "A = {a}");
    assert!((tuned - ideal).abs() < 1e-8 * ideal);
    // Z1 loses stability at the top of the range
    assert!(rows.last().unwrap().1[1].is_none());
}

#[test]
fn stability_bound_is_necessary() {
    let (bound, first) = stability_bounds::run_example().unwrap();
    assert!(first.unwrap() <= bound);
}

#[test]
fn beyond_linear_converges_quadratically() {
    let rows = beyond_linear::run_example().unwrap();
    let dev: Vec<f64> = rows.iter().map(|(_, r)| (r - 1.0).abs()).collect();
    assert!(dev[3] < 1e-4);
    assert!((dev[2] / dev[3] - 100.0).abs() < 5.0);
}

#[test]
fn oracle_checks_catch_fault() {
    let (n, failures, caught) = oracle_checks::run_example().unwrap();
    assert!(n > 100);
    assert_eq!(failures, 0);
    assert!(caught > 10);
}

#[test]
fn monte_carlo_small_ensemble() {
    for c in monte_carlo_noise::run_example().unwrap() {
        assert!(c.z_score.abs() < 3.0, "{c:?}");
    }
}
