use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn algmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_algmech")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn list_models_names_every_builtin() {
    let out = algmech(&["list-models"]);
    assert_eq!(code(&out), 0);
    let names: Vec<String> = report(&out)["models"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap().to_string()).collect();
    for name in ["free-particle", "pendulum", "harmonic-oscillator", "rigid-body", "suslov", "degenerate-demo", "affine-rank2"] {
        assert!(names.contains(&name.to_string()), "{name} missing");
    }
}

#[test]
fn validate_rigid_body_passes() {
    let out = algmech(&["validate", "--model", "rigid-body"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["structure"]["max_residual_eq1"].as_f64().unwrap() <= 1e-10);
    assert!(r["structure"]["max_residual_eq2"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn validate_broken_config_fails() {
    let out = algmech(&["validate", "--config", &data("broken.json")]);
    assert_eq!(code(&out), 2);
    let eq1 = report(&out)["structure"]["max_residual_eq1"].as_f64().unwrap();
    assert!((eq1 - 1.0).abs() < 1e-12, "eq1 = {eq1}");
}

#[test]
fn validate_pendulum_many_samples() {
    let out = algmech(&["validate", "--model", "pendulum", "--samples", "1000"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["samples"], 1000);
}

#[test]
fn simulate_rigid_body_writes_constant_energy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rb.csv");
    let out = algmech(&["simulate", "--model", "rigid-body", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["energy"]["E0"], 3.0);
    assert!(r["energy"]["max_abs_drift"].as_f64().unwrap() <= 1e-8);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,y1,y2,y3,p1,p2,p3,E_L,res_kin,res_mom");
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 10_001);
    assert!(energies.iter().all(|e| (e - 3.0).abs() <= 1e-8));
}

#[test]
fn simulate_degenerate_reports_hessian_condition() {
    let out = algmech(&["simulate", "--model", "degenerate-demo", "--method", "rk4"]);
    assert_eq!(code(&out), 3);
    let msg = report(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("Hessian condition"), "{msg}");
}

#[test]
fn simulate_degenerate_midpoint_diverges() {
    let out = algmech(&["simulate", "--model", "degenerate-demo", "--method", "implicit-midpoint", "--T", "0.1"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn simulate_suslov_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("suslov.csv");
    let out = algmech(&["simulate", "--model", "suslov", "--T", "2", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - 0.3).abs() <= 1e-12 && (v[2] - 0.4).abs() <= 1e-12 && v[3].abs() <= 1e-12);
    }
}

#[test]
fn simulate_accepts_explicit_initial_conditions() {
    let out = algmech(&["simulate", "--model", "pendulum", "--x0", "-0.5", "--y0", "1", "--h", "0.01", "--T", "1", "--method", "implicit-midpoint"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["initial"]["x0"][0], -0.5);
    assert_eq!(r["steps"], 100);
    assert_eq!(r["method"], "implicit_midpoint");
}

#[test]
fn simulate_tilted_suslov_config() {
    let out = algmech(&["simulate", "--config", &data("tilted-suslov.json"), "--T", "2"]);
    assert_eq!(code(&out), 0);
    let y: Vec<f64> = report(&out)["final"]["y"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((y[0] + y[1] + y[2]).abs() < 1e-12, "velocity left the constraint plane: {y:?}");
}

#[test]
fn dirac_check_every_builtin() {
    for name in ["free-particle", "pendulum", "harmonic-oscillator", "rigid-body", "suslov", "degenerate-demo", "affine-rank2"] {
        let out = algmech(&["dirac-check", "--model", name, "--pairs", "200"]);
        assert_eq!(code(&out), 0, "{name}");
        let r = report(&out);
        assert_eq!(r["generators"]["min_rank"], r["generators"]["expected_rank"]);
        assert!(r["self_orthogonality"]["max_residual"].as_f64().unwrap() <= 1e-10);
        assert_eq!(r["constructions_agree"]["agree"], 200);
    }
}

#[test]
fn dirac_check_is_independent_of_jacobi() {
    let out = algmech(&["dirac-check", "--config", &data("corrupted.json")]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["structure_equations"]["pass"], false);
    assert_eq!(code(&algmech(&["validate", "--config", &data("corrupted.json")])), 2);
}

#[test]
fn dirac_check_without_pairs() {
    let out = algmech(&["dirac-check", "--model", "suslov", "--pairs", "0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["constructions_agree"]["pairs"], 0);
}

#[test]
fn hj_check_free_particle_and_oscillator() {
    for name in ["free-particle", "harmonic-oscillator"] {
        let out = algmech(&["hj-check", "--model", name]);
        assert_eq!(code(&out), 0, "{name}");
        let v = &report(&out)["verdict"];
        assert_eq!(v["hj_pass"], true);
        assert_eq!(v["lift_pass"], true);
        assert_eq!(v["consistent"], true);
    }
}

#[test]
fn hj_check_failing_hypothesis_has_its_own_exit_code() {
    let out = algmech(&["hj-check", "--config", &data("bad-hypothesis.json")]);
    assert_eq!(code(&out), 5);
    assert_eq!(report(&out)["error"]["kind"], "hypothesis_violated");
}

#[test]
fn config_errors() {
    assert_eq!(code(&algmech(&["validate", "--model", "heavy-top"])), 6);
    assert_eq!(code(&algmech(&["validate", "--model", "rigid-body", "--param", "I1=-1"])), 6);
    assert_eq!(code(&algmech(&["validate", "--config", "/nonexistent.json"])), 6);
    assert_eq!(code(&algmech(&["validate", "--model", "rigid-body", "--config", &data("broken.json")])), 6);
    assert_eq!(code(&algmech(&["hj-check", "--model", "rigid-body"])), 6);
    assert_eq!(code(&algmech(&["simulate"])), 6);
}

#[test]
fn export_and_reload_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let exported = algmech(&["export-config", "--model", "suslov", "--param", "I12=0.3"]);
    assert_eq!(code(&exported), 0);
    let path = dir.path().join("suslov.json");
    std::fs::write(&path, &exported.stdout).unwrap();
    let a = report(&algmech(&["simulate", "--model", "suslov", "--param", "I12=0.3", "--T", "1"]));
    let b = report(&algmech(&["simulate", "--config", path.to_str().unwrap(), "--T", "1"]));
    assert_eq!(a["final"], b["final"]);
    assert_eq!(a["energy"], b["energy"]);
    assert_eq!(a["residuals"], b["residuals"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let args = ["simulate", "--model", "affine-rank2", "--T", "1", "--out", csv.to_str().unwrap()];
    let first = algmech(&args);
    let first_csv = std::fs::read(&csv).unwrap();
    let second = algmech(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first_csv, std::fs::read(&csv).unwrap());
    let a = algmech(&["dirac-check", "--model", "suslov", "--seed", "7"]);
    let b = algmech(&["dirac-check", "--model", "suslov", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
}
