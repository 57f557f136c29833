//! Command implementations behind the `algmech` binary.
//!
//! [`run`] parses arguments, executes one command and returns everything the
//! process should emit: the JSON report for stdout, files to write and the
//! exit code.  It performs no output itself, so reports are easy to test and
//! all writes happen in one place.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use algmech::algebroid::{BasePoint, DEFAULT_RANK_TOL};
use algmech::config::ModelConfig;
use algmech::dirac::{check_self_orthogonal, dirac_generators, dirac_member_poisson, dirac_member_symplectic, DiracPair};
use algmech::dynamics::{energy_drift, integrate, trajectory_residuals, Method};
use algmech::error::Error;
use algmech::hj::{check_closedness, check_in_k, hj_residual, verify_theorem};
use algmech::models::{get_model, ModelBundle, MODEL_NAMES};
use algmech::prolong::{ProlongCovector, ProlongVector};
use algmech::sampling;
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::Rng;
use serde_json::{json, Value};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NEWTON: i32 = 4;
pub const EXIT_HYPOTHESIS: i32 = 5;
pub const EXIT_CONFIG: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "algmech", version, about = "Implicit Lagrangian systems on Lie algebroids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Comma-separated coordinates; the empty string is the empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

fn parse_coords(s: &str) -> Result<Coords, String> {
    if s.trim().is_empty() {
        return Ok(Coords(Vec::new()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Coords)
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Clone, Args)]
pub struct ModelRef {
    /// Built-in model name (see list-models).
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub model: Option<String>,
    /// JSON model file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model parameter, e.g. --param I1=2 (repeatable; built-ins only).
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in models.
    ListModels,
    /// Check the structure equations and the constraint subbundle rank at sampled points.
    Validate {
        #[command(flatten)]
        model: ModelRef,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = sampling::DEFAULT_SEED)]
        seed: u64,
    },
    /// Integrate the implicit Lagrangian equations and report energy and residuals.
    Simulate {
        #[command(flatten)]
        model: ModelRef,
        /// Initial base point, comma separated.
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        x0: Option<Coords>,
        /// Initial velocity along the subbundle's spanning columns, comma separated.
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        y0: Option<Coords>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long = "T", default_value_t = 10.0)]
        t_end: f64,
        /// rk4 or implicit-midpoint.
        #[arg(long, default_value = "rk4")]
        method: Method,
        /// Trajectory CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify the induced almost Dirac structure at sampled points.
    DiracCheck {
        #[command(flatten)]
        model: ModelRef,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Random pairs on which the two membership tests are compared.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = sampling::DEFAULT_SEED)]
        seed: u64,
    },
    /// Verify a Hamilton-Jacobi section along its base flow.
    HjCheck {
        #[command(flatten)]
        model: ModelRef,
        /// Section name; defaults to the model's first section.
        #[arg(long)]
        section: Option<String>,
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        x0: Option<Coords>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Print a model as a JSON config.
    ExportConfig {
        #[command(flatten)]
        model: ModelRef,
    },
}

/// What the process should emit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<(PathBuf, String)>,
    pub exit_code: i32,
}

impl Outcome {
    fn report(report: &Value, exit_code: i32) -> Self {
        let stdout = serde_json::to_string_pretty(report).expect("json") + "\n";
        Outcome { stdout, stderr: String::new(), files: Vec::new(), exit_code }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Degenerate { .. } => EXIT_DEGENERATE,
        Error::NewtonDivergence { .. } => EXIT_NEWTON,
        Error::HypothesisViolated { .. } => EXIT_HYPOTHESIS,
        Error::Parse { .. } | Error::Config(_) | Error::UnknownModel(_) | Error::BadParams(_) | Error::Dimension(_) => EXIT_CONFIG,
        Error::Eval { .. } | Error::RankDeficient { .. } | Error::BlowUp { .. } => EXIT_FAIL,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Eval { .. } => "evaluation",
        Error::Dimension(_) => "dimension",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::Degenerate { .. } => "degenerate",
        Error::NewtonDivergence { .. } => "newton_divergence",
        Error::HypothesisViolated { .. } => "hypothesis_violated",
        Error::BlowUp { .. } => "blow_up",
        Error::UnknownModel(_) => "unknown_model",
        Error::BadParams(_) => "bad_params",
        Error::Config(_) => "config",
    }
}

fn error_outcome(command: &str, e: &Error) -> Outcome {
    let code = exit_code(e);
    let report = json!({
        "command": command,
        "error": { "kind": error_kind(e), "message": e.to_string() },
        "exit_code": code,
    });
    let mut out = Outcome::report(&report, code);
    out.stderr = format!("error: {e}\n");
    out
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Outcome { stdout: text, stderr: String::new(), files: Vec::new(), exit_code: EXIT_PASS }
                }
                _ => Outcome { stdout: String::new(), stderr: text, files: Vec::new(), exit_code: EXIT_CONFIG },
            };
        }
    };
    execute(&cli.command)
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::ListModels => "list-models",
        Command::Validate { .. } => "validate",
        Command::Simulate { .. } => "simulate",
        Command::DiracCheck { .. } => "dirac-check",
        Command::HjCheck { .. } => "hj-check",
        Command::ExportConfig { .. } => "export-config",
    }
}

pub fn execute(command: &Command) -> Outcome {
    let name = command_name(command);
    let result = match command {
        Command::ListModels => list_models(),
        Command::Validate { model, samples, tol, seed } => load(model).and_then(|b| validate(&b, model, *samples, *tol, *seed)),
        Command::Simulate { model, x0, y0, h, t_end, method, out } => {
            load(model).and_then(|b| simulate(&b, model, x0.as_ref(), y0.as_ref(), *h, *t_end, *method, out.as_ref()))
        }
        Command::DiracCheck { model, points, pairs, tol, seed } => {
            load(model).and_then(|b| dirac_check(&b, model, *points, *pairs, *tol, *seed))
        }
        Command::HjCheck { model, section, x0, h, t_end, tol } => {
            load(model).and_then(|b| hj_check(&b, model, section.as_deref(), x0.as_ref(), *h, *t_end, *tol))
        }
        Command::ExportConfig { model } => load(model).map(|b| {
            let text = b.config.to_json() + "\n";
            Outcome { stdout: text, stderr: String::new(), files: Vec::new(), exit_code: EXIT_PASS }
        }),
    };
    result.unwrap_or_else(|e| error_outcome(name, &e))
}

/// Resolve `--model` / `--config`.
pub fn load(r: &ModelRef) -> Result<ModelBundle, Error> {
    let params: BTreeMap<String, f64> = r.params.iter().cloned().collect();
    match (&r.model, &r.config) {
        (Some(name), None) => get_model(name, &params),
        (None, Some(path)) => {
            if !params.is_empty() {
                return Err(Error::Config("--param applies to built-in models; set params in the config file".into()));
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ModelBundle::from_config(ModelConfig::from_json(&text)?)
        }
        _ => Err(Error::Config("exactly one of --model and --config is required".into())),
    }
}

fn model_echo(b: &ModelBundle, r: &ModelRef) -> Value {
    json!({
        "name": b.name,
        "source": match &r.config { Some(p) => p.display().to_string(), None => "built-in".into() },
        "params": b.config.params,
        "m": b.system.base_dim(),
        "n": b.system.rank(),
        "r": b.system.constraint_rank(),
    })
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn list_models() -> Result<Outcome, Error> {
    let mut models = Vec::new();
    for name in MODEL_NAMES {
        let b = get_model(name, &BTreeMap::new())?;
        models.push(json!({
            "name": name,
            "description": b.description,
            "m": b.system.base_dim(),
            "n": b.system.rank(),
            "r": b.system.constraint_rank(),
            "hj_sections": b.sections.iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
            "oracle": b.oracle.is_some(),
        }));
    }
    Ok(Outcome::report(&json!({ "command": "list-models", "models": models }), EXIT_PASS))
}

fn validate(b: &ModelBundle, r: &ModelRef, samples: usize, tol: f64, seed: u64) -> Result<Outcome, Error> {
    let mut rng = sampling::rng(seed, 0);
    let points: Vec<BasePoint> = (0..samples).map(|_| b.sample_base(&mut rng)).collect();
    let structure = b.system.alg.validate_structure(&points, tol)?;
    let (n, k) = (b.system.rank(), b.system.constraint_rank());
    let mut rank_failures = 0;
    for pt in &points {
        match b.system.subbundle.frame(&pt.x, DEFAULT_RANK_TOL) {
            Ok((q, c)) if q.ncols() == k && c.ncols() == n - k => {}
            Ok(_) | Err(Error::RankDeficient { .. }) => rank_failures += 1,
            Err(e) => return Err(e),
        }
    }
    let pass = structure.pass && rank_failures == 0;
    let report = json!({
        "command": "validate",
        "model": model_echo(b, r),
        "samples": samples,
        "seed": seed,
        "tol": tol,
        "structure": structure,
        "subbundle": { "rank": k, "annihilator_rank": n - k, "rank_failures": rank_failures },
        "pass": pass,
    });
    Ok(Outcome::report(&report, if pass { EXIT_PASS } else { EXIT_FAIL }))
}

/// Interior-node residual tolerance for a method at step `h`, per unit state scale.
pub fn trajectory_tolerance(method: Method, h: f64) -> f64 {
    match method {
        Method::Rk4 => 50.0 * h.powi(4),
        Method::ImplicitMidpoint => 10.0 * h * h,
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    b: &ModelBundle,
    r: &ModelRef,
    x0: Option<&Coords>,
    y0: Option<&Coords>,
    h: f64,
    t_end: f64,
    method: Method,
    out: Option<&PathBuf>,
) -> Result<Outcome, Error> {
    let (dx, dy) = b.initial().unwrap_or_else(|| (vec![0.0; b.system.base_dim()], vec![0.0; b.system.constraint_rank()]));
    let x0 = x0.map_or(dx, |c| c.0.clone());
    let ya0 = y0.map_or(dy, |c| c.0.clone());
    let traj = integrate(&b.system, &DVector::from_vec(x0.clone()), &DVector::from_vec(ya0.clone()), h, t_end, method)?;
    let drift = energy_drift(&b.system, &traj)?;
    let tol = trajectory_tolerance(method, h);
    let res = trajectory_residuals(&b.system, &traj, tol)?;
    let interior = if res.len() > 4 { &res[2..res.len() - 2] } else { &res[..] };
    let max = |f: fn(&algmech::dynamics::Residual) -> f64| interior.iter().map(f).fold(0.0, f64::max);
    let residual_pass = interior.iter().all(|r| r.pass);
    let last = traj.final_state();
    let mut files = Vec::new();
    if let Some(path) = out {
        files.push((path.clone(), traj.to_csv(&b.system)?));
    }
    let report = json!({
        "command": "simulate",
        "model": model_echo(b, r),
        "method": method.to_string(),
        "h": h,
        "T": t_end,
        "steps": traj.states.len() - 1,
        "initial": { "x0": x0, "ya0": ya0 },
        "final": { "t": traj.times.last(), "x": vec_json(&last.x), "y": vec_json(&last.y), "p": vec_json(&last.p) },
        "energy": drift,
        "residuals": {
            "tol_per_unit_scale": tol,
            "max_r_u": max(|r| r.r_u),
            "max_r_kin": max(|r| r.r_kin),
            "max_r_leg": max(|r| r.r_leg),
            "max_r_mom": max(|r| r.r_mom),
            "pass": residual_pass,
        },
        "output": out.map(|p| p.display().to_string()),
    });
    let mut outcome = Outcome::report(&report, if residual_pass { EXIT_PASS } else { EXIT_FAIL });
    outcome.files = files;
    Ok(outcome)
}

/// A random pair near `D_U`: a random combination of generators, perturbed in
/// one slot half of the time.
fn random_pair(b: &ModelBundle, rng: &mut impl Rng) -> Result<DiracPair, Error> {
    let pt = b.sample_dual(rng);
    let basis = dirac_generators(&b.system.alg, &b.system.subbundle, &pt, DEFAULT_RANK_TOL)?;
    let n = b.system.rank();
    let mut x = ProlongVector { base: pt.clone(), z: DVector::zeros(n), u: DVector::zeros(n) };
    let mut alpha = ProlongCovector { base: pt, r: DVector::zeros(n), v: DVector::zeros(n) };
    for g in &basis.generators {
        let c: f64 = rng.random_range(-1.0..=1.0);
        x.z += &g.x.z * c;
        x.u += &g.x.u * c;
        alpha.r += &g.alpha.r * c;
        alpha.v += &g.alpha.v * c;
    }
    if rng.random_bool(0.5) {
        let slot = rng.random_range(0..4);
        let k = rng.random_range(0..n);
        let delta = rng.random_range(0.01..=1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match slot {
            0 => x.z[k] += delta,
            1 => x.u[k] += delta,
            2 => alpha.r[k] += delta,
            _ => alpha.v[k] += delta,
        }
    }
    DiracPair::new(x, alpha)
}

fn dirac_check(b: &ModelBundle, r: &ModelRef, points: usize, pairs: usize, tol: f64, seed: u64) -> Result<Outcome, Error> {
    let sys = &b.system;
    let expected = 2 * sys.rank();
    let mut rng = sampling::rng(seed, 1);
    let mut min_rank = usize::MAX;
    let mut max_self = 0.0f64;
    let mut bases = Vec::with_capacity(points);
    for _ in 0..points {
        let pt = b.sample_dual(&mut rng);
        let basis = dirac_generators(&sys.alg, &sys.subbundle, &pt, DEFAULT_RANK_TOL)?;
        min_rank = min_rank.min(basis.rank(DEFAULT_RANK_TOL));
        max_self = max_self.max(check_self_orthogonal(&basis));
        bases.push(BasePoint { x: pt.x });
    }
    if points == 0 {
        min_rank = expected;
    }
    let mut rng = sampling::rng(seed, 2);
    let (mut agree, mut members) = (0usize, 0usize);
    for _ in 0..pairs {
        let pair = random_pair(b, &mut rng)?;
        let s = dirac_member_symplectic(&sys.alg, &sys.subbundle, &pair, DEFAULT_RANK_TOL)?;
        let p = dirac_member_poisson(&sys.alg, &sys.subbundle, &pair, DEFAULT_RANK_TOL)?;
        agree += usize::from(s.member == p.member);
        members += usize::from(s.member);
    }
    let structure = sys.alg.validate_structure(&bases, tol)?;
    let rank_pass = min_rank == expected;
    let self_pass = max_self <= tol;
    let agree_pass = agree == pairs;
    let pass = rank_pass && self_pass && agree_pass;
    let report = json!({
        "command": "dirac-check",
        "model": model_echo(b, r),
        "points": points,
        "pairs": pairs,
        "seed": seed,
        "tol": tol,
        "generators": { "expected_rank": expected, "min_rank": min_rank, "pass": rank_pass },
        "self_orthogonality": { "max_residual": max_self, "pass": self_pass },
        "constructions_agree": { "agree": agree, "pairs": pairs, "members": members, "pass": agree_pass },
        "structure_equations": structure,
        "pass": pass,
    });
    Ok(Outcome::report(&report, if pass { EXIT_PASS } else { EXIT_FAIL }))
}

fn hj_check(
    b: &ModelBundle,
    r: &ModelRef,
    section: Option<&str>,
    x0: Option<&Coords>,
    h: f64,
    t_end: Option<f64>,
    tol: f64,
) -> Result<Outcome, Error> {
    let named = match section {
        Some(name) => b.section(name).ok_or_else(|| Error::Config(format!("model `{}` has no section `{name}`", b.name)))?,
        None => b.sections.first().ok_or_else(|| Error::Config(format!("model `{}` has no HJ sections", b.name)))?,
    };
    let x0 = x0.map_or(named.x0.clone(), |c| c.0.clone());
    if x0.len() != b.system.base_dim() {
        return Err(Error::Dimension(format!("x0 needs {} coordinates", b.system.base_dim())));
    }
    let t_end = t_end.unwrap_or(named.t_end);
    let start = BasePoint::new(&x0);
    let s = &named.section;
    let in_k = check_in_k(&b.system, s, &start, DEFAULT_RANK_TOL)?;
    let closed = check_closedness(&b.system, s, &start)?;
    let residual = hj_residual(&b.system, s, &start)?;
    let echo = json!({
        "command": "hj-check",
        "model": model_echo(b, r),
        "section": named.name,
        "x0": x0,
        "h": h,
        "T": t_end,
        "tol": tol,
        "at_x0": { "in_K": in_k, "closedness": closed, "hj_residual": vec_json(&residual) },
    });
    let verdict = match verify_theorem(&b.system, s, &start, h, t_end, tol) {
        Ok(v) => v,
        Err(e) => {
            let mut out = error_outcome("hj-check", &e);
            let mut report = echo;
            report["error"] = json!({ "kind": error_kind(&e), "message": e.to_string() });
            report["exit_code"] = json!(out.exit_code);
            out.stdout = serde_json::to_string_pretty(&report).expect("json") + "\n";
            return Ok(out);
        }
    };
    let pass = verdict.hj_pass && verdict.lift_pass;
    let mut report = echo;
    report["verdict"] = json!(verdict);
    report["pass"] = json!(pass);
    Ok(Outcome::report(&report, if pass { EXIT_PASS } else { EXIT_FAIL }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_lists() {
        assert_eq!(parse_coords("1, -2.5,3e-1").unwrap(), Coords(vec![1.0, -2.5, 0.3]));
        assert_eq!(parse_coords("").unwrap(), Coords(vec![]));
        assert!(parse_coords("1,,2").is_err());
    }

    #[test]
    fn parameters() {
        assert_eq!(parse_param("I1=2").unwrap(), ("I1".to_string(), 2.0));
        assert!(parse_param("I1").is_err());
        assert!(parse_param("I1=x").is_err());
    }

    #[test]
    fn exit_codes_are_distinct_per_failure_class() {
        assert_eq!(exit_code(&Error::Degenerate { condition: 1e20 }), 3);
        assert_eq!(exit_code(&Error::NewtonDivergence { step: 1, residual: 1.0 }), 4);
        assert_eq!(exit_code(&Error::UnknownModel("x".into())), 6);
    }

    #[test]
    fn parse_errors_exit_with_config_code() {
        assert_eq!(run(["algmech", "validate"]).exit_code, EXIT_CONFIG);
        assert_eq!(run(["algmech", "frobnicate"]).exit_code, EXIT_CONFIG);
        assert_eq!(run(["algmech", "simulate", "--model", "pendulum", "--method", "euler"]).exit_code, EXIT_CONFIG);
        assert_eq!(run(["algmech", "--help"]).exit_code, EXIT_PASS);
    }
}
