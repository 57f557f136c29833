use std::collections::BTreeMap;

use algmech::algebroid::BasePoint;
use algmech::config::ModelConfig;
use algmech::dynamics::{adapted_rhs, integrate, trajectory_residuals, Method, Trajectory};
use algmech::models::{get_model, oracle_trajectory, ModelBundle, Oracle, MODEL_NAMES};
use algmech::sampling::{self, DEFAULT_SEED};
use nalgebra::DVector;
use rand::Rng;

fn model(name: &str) -> ModelBundle {
    get_model(name, &BTreeMap::new()).unwrap()
}

fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(s, t)| (&s.x - &t.x).amax().max((&s.y - &t.y).amax()).max((&s.p - &t.p).amax()))
        .fold(0.0, f64::max)
}

fn run(b: &ModelBundle, x0: &[f64], ya0: &[f64], h: f64, t_end: f64) -> Trajectory {
    integrate(&b.system, &DVector::from_column_slice(x0), &DVector::from_column_slice(ya0), h, t_end, Method::Rk4).unwrap()
}

#[test]
fn every_model_satisfies_the_structure_equations() {
    for name in MODEL_NAMES {
        let b = model(name);
        let mut rng = sampling::rng(DEFAULT_SEED, 0);
        let pts: Vec<BasePoint> = (0..100).map(|_| b.sample_base(&mut rng)).collect();
        let r = b.system.alg.validate_structure(&pts, 1e-10).unwrap();
        assert!(r.pass, "{name}: {r:?}");
    }
}

#[test]
fn oracles_agree_from_seeded_initial_conditions() {
    let mut rng = sampling::rng(DEFAULT_SEED, 11);
    for name in MODEL_NAMES.iter().filter(|n| **n != "degenerate-demo") {
        let b = model(name);
        let tol = if *name == "rigid-body" { 1e-8 } else { 1e-6 };
        for _ in 0..3 {
            let x0: Vec<f64> = b.sample_base(&mut rng).x.iter().map(|v| 0.5 * v).collect();
            let ya0: Vec<f64> = (0..b.system.constraint_rank()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ours = run(&b, &x0, &ya0, 1e-3, 2.0);
            let reference = oracle_trajectory(&b, &x0, &ya0, 1e-3, 2.0).unwrap();
            let dev = max_deviation(&ours, &reference);
            assert!(dev <= tol, "{name} from {x0:?}, {ya0:?}: {dev:e}");
        }
    }
}

#[test]
fn rigid_body_conserves_the_casimir() {
    let b = model("rigid-body");
    let traj = run(&b, &[], &[1.0, 1.0, 1.0], 1e-3, 10.0);
    let c0 = traj.states[0].p.norm_squared();
    let drift = traj.states.iter().map(|s| (s.p.norm_squared() - c0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-6, "{drift:e}");
}

#[test]
fn tangent_bundle_models_follow_euler_lagrange() {
    // On TQ with L = y^2/2 - V(x), the reduced equations are xdot = y, ydot = -V'(x).
    let cases: [(&str, fn(f64) -> f64); 2] = [("pendulum", |x| -x.sin()), ("harmonic-oscillator", |x| -x)];
    let mut rng = sampling::rng(DEFAULT_SEED, 12);
    for (name, force) in cases {
        let b = model(name);
        for _ in 0..20 {
            let x = b.sample_base(&mut rng).x;
            let ya = DVector::from_element(1, rng.random_range(-2.0..2.0));
            let rhs = adapted_rhs(&b.system, &x, &ya).unwrap();
            assert!((rhs.xdot[0] - ya[0]).abs() <= 1e-14);
            assert!((rhs.ydot_a[0] - force(x[0])).abs() <= 1e-14, "{name}");
        }
    }
    let b = get_model("free-particle", &[("d".to_string(), 3.0)].into_iter().collect()).unwrap();
    let traj = run(&b, &[0.0, 1.0, 2.0], &[1.0, -1.0, 0.5], 1e-2, 1.0);
    let last = traj.final_state();
    assert!((&last.x - DVector::from_column_slice(&[1.0, 0.0, 2.5])).amax() <= 1e-12);
}

#[test]
fn suslov_velocity_stays_in_the_constraint_plane() {
    let p: BTreeMap<String, f64> = [("I13", 0.2), ("I23", -0.1), ("a1", 1.0), ("a3", 1.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let b = get_model("suslov", &p).unwrap();
    let Some(Oracle::Suslov { axis, .. }) = b.oracle.clone() else { panic!("suslov oracle") };
    let traj = run(&b, &[], &[0.3, -0.4], 1e-3, 3.0);
    for s in &traj.states {
        let along = axis.iter().zip(s.y.iter()).map(|(a, y)| a * y).sum::<f64>();
        assert!(along.abs() <= 1e-12);
    }
    let reference = oracle_trajectory(&b, &[], &[0.3, -0.4], 1e-3, 3.0).unwrap();
    assert!(max_deviation(&traj, &reference) <= 1e-6);
}

#[test]
fn rk4_residuals_at_the_default_initial_conditions() {
    for name in MODEL_NAMES.iter().filter(|n| **n != "degenerate-demo") {
        let b = model(name);
        let (x0, ya0) = b.initial().unwrap();
        let h = 1e-3;
        let traj = run(&b, &x0, &ya0, h, 1.0);
        let res = trajectory_residuals(&b.system, &traj, 50.0 * h.powi(4)).unwrap();
        assert!(res[2..res.len() - 2].iter().all(|r| r.pass), "{name}");
    }
}

#[test]
fn config_round_trip_preserves_the_model() {
    for name in MODEL_NAMES {
        let b = model(name);
        let back = ModelBundle::from_config(ModelConfig::from_json(&b.config.to_json()).unwrap()).unwrap();
        assert_eq!(back.config, b.config);
        let mut rng = sampling::rng(DEFAULT_SEED, 13);
        let pts: Vec<BasePoint> = (0..20).map(|_| b.sample_base(&mut rng)).collect();
        let r1 = b.system.alg.validate_structure(&pts, 1e-10).unwrap();
        let r2 = back.system.alg.validate_structure(&pts, 1e-10).unwrap();
        assert!((r1.max_residual_eq1 - r2.max_residual_eq1).abs() <= 1e-14);
        assert!((r1.max_residual_eq2 - r2.max_residual_eq2).abs() <= 1e-14);
        if name != "degenerate-demo" {
            let (x0, ya0) = b.initial().unwrap();
            let t1 = run(&b, &x0, &ya0, 1e-2, 0.5);
            let t2 = run(&back, &x0, &ya0, 1e-2, 0.5);
            assert!(max_deviation(&t1, &t2) <= 1e-14, "{name}");
        }
    }
}
