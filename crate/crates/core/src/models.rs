//! Built-in systems and their classical reference integrators.
//!
//! Each model is described by a [`ModelConfig`], so built-ins and user
//! configs go through the same construction.  Oracles are hand-written
//! classical equations of motion (Euler equations, the Lagrange-multiplier
//! form of the Suslov problem, second-order ODEs) integrated by a separate
//! RK4 on plain arrays.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::Rng;

use crate::algebroid::{BasePoint, DualPoint, FiberPoint};
use crate::config::{InitialConfig, ModelConfig, NamedSection, SectionConfig, SubbundleSpec};
use crate::dynamics::{ImplicitSystem, Method, State, Trajectory};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;

pub const MODEL_NAMES: [&str; 7] =
    ["free-particle", "pendulum", "harmonic-oscillator", "rigid-body", "suslov", "degenerate-demo", "affine-rank2"];

/// Hand-coded reference dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    /// `xddot = 0` on `R^d`.
    FreeParticle { d: usize },
    /// `xddot = -sin x`.
    Pendulum,
    /// `xddot = -x`.
    HarmonicOscillator,
    /// `I wdot = (I w) x w`.
    RigidBody { inertia: Matrix3<f64> },
    /// `I wdot = (I w) x w + lambda a`, with `lambda` keeping `a . w = 0`.
    Suslov { inertia: Matrix3<f64>, axis: Vector3<f64> },
    /// `xdot = y1 + x y2`, `y1dot = -x - y1 y2`, `y2dot = y1^2 - x^2`.
    AffineRank2,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub name: String,
    pub description: String,
    pub config: ModelConfig,
    pub system: ImplicitSystem,
    pub bounds: Vec<(f64, f64)>,
    pub fiber_range: (f64, f64),
    pub sections: Vec<NamedSection>,
    pub oracle: Option<Oracle>,
}

impl ModelBundle {
    pub fn from_config(config: ModelConfig) -> Result<Self> {
        let built = config.build()?;
        Ok(ModelBundle {
            name: config.name.clone().unwrap_or_else(|| "config".into()),
            description: config.description.clone().unwrap_or_default(),
            system: built.system,
            bounds: built.bounds,
            fiber_range: built.fiber_range,
            sections: built.sections,
            oracle: None,
            config,
        })
    }

    pub fn section(&self, name: &str) -> Option<&NamedSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sample_base(&self, rng: &mut impl Rng) -> BasePoint {
        BasePoint { x: sampling::in_box(rng, &self.bounds) }
    }

    pub fn sample_fiber(&self, rng: &mut impl Rng) -> FiberPoint {
        let (lo, hi) = self.fiber_range;
        let x = sampling::in_box(rng, &self.bounds);
        FiberPoint { x, y: sampling::uniform(rng, self.system.rank(), lo, hi) }
    }

    pub fn sample_dual(&self, rng: &mut impl Rng) -> DualPoint {
        let f = self.sample_fiber(rng);
        DualPoint { x: f.x, p: f.y }
    }

    /// Default `(x0, ya0)` for simulations.
    pub fn initial(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.config.initial.as_ref().map(|i| (i.x0.clone(), i.ya0.clone()))
    }
}

fn s(v: f64) -> String {
    format!("{v:?}")
}

fn row(items: &[&str]) -> Vec<String> {
    items.iter().map(|t| t.to_string()).collect()
}

struct Params<'a> {
    given: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(given: &'a BTreeMap<String, f64>, allowed: &[&'static str]) -> Result<Self> {
        if let Some(k) = given.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::BadParams(format!("unknown parameter `{k}` (allowed: {})", allowed.join(", "))));
        }
        if let Some((k, v)) = given.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::BadParams(format!("parameter `{k}` = {v} is not finite")));
        }
        Ok(Params { given, allowed: allowed.to_vec() })
    }

    fn get(&self, key: &'static str, default: f64) -> f64 {
        debug_assert!(self.allowed.contains(&key));
        self.given.get(key).copied().unwrap_or(default)
    }
}

fn tangent_config(name: &str, description: &str, d: usize, lagrangian: &str, bounds: Vec<[f64; 2]>) -> ModelConfig {
    let pairs = d * d.saturating_sub(1) / 2;
    ModelConfig {
        name: Some(name.into()),
        description: Some(description.into()),
        m: d,
        n: d,
        r: d,
        params: BTreeMap::new(),
        anchor: (0..d).map(|i| (0..d).map(|a| if i == a { "1".into() } else { "0".into() }).collect()).collect(),
        structure: vec![vec!["0".into(); pairs]; d],
        lagrangian: lagrangian.into(),
        subbundle: SubbundleSpec::Adapted(format!("adapted:{d}")),
        bounds,
        fiber_range: [-2.0, 2.0],
        hj_sections: BTreeMap::new(),
        initial: None,
    }
}

fn section(gamma: Vec<String>, x0: Vec<f64>, t_end: f64) -> SectionConfig {
    SectionConfig { gammabar: gamma.clone(), gamma, x0: Some(x0), t_end: Some(t_end) }
}

const INERTIA_KEYS: [&str; 6] = ["I1", "I2", "I3", "I12", "I13", "I23"];

fn inertia(p: &Params) -> Result<(Matrix3<f64>, BTreeMap<String, f64>)> {
    let vals: Vec<f64> = INERTIA_KEYS.iter().zip([1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).map(|(k, d)| p.get(k, d)).collect();
    let i = Matrix3::new(vals[0], vals[3], vals[4], vals[3], vals[1], vals[5], vals[4], vals[5], vals[2]);
    if i.cholesky().is_none() {
        return Err(Error::BadParams("inertia tensor must be symmetric positive definite".into()));
    }
    Ok((i, INERTIA_KEYS.iter().zip(vals).map(|(k, v)| (k.to_string(), v)).collect()))
}

fn so3_config(name: &str, description: &str, params: BTreeMap<String, f64>) -> ModelConfig {
    ModelConfig {
        name: Some(name.into()),
        description: Some(description.into()),
        m: 0,
        n: 3,
        r: 3,
        params,
        anchor: Vec::new(),
        structure: vec![row(&["0", "0", "1"]), row(&["0", "-1", "0"]), row(&["1", "0", "0"])],
        lagrangian: "0.5*(I1*y1^2 + I2*y2^2 + I3*y3^2) + I12*y1*y2 + I13*y1*y3 + I23*y2*y3".into(),
        subbundle: SubbundleSpec::Adapted("adapted:3".into()),
        bounds: Vec::new(),
        fiber_range: [-2.0, 2.0],
        hj_sections: BTreeMap::new(),
        initial: Some(InitialConfig { x0: Vec::new(), ya0: vec![1.0, 1.0, 1.0] }),
    }
}

/// Config and oracle of a registered model.
pub fn model_config(name: &str, params: &BTreeMap<String, f64>) -> Result<(ModelConfig, Option<Oracle>)> {
    match name {
        "free-particle" => {
            let p = Params::new(params, &["d"])?;
            let d = p.get("d", 2.0);
            if d.fract() != 0.0 || !(1.0..=8.0).contains(&d) {
                return Err(Error::BadParams(format!("d must be an integer in 1..=8, got {d}")));
            }
            let d = d as usize;
            let l = (1..=d).map(|i| format!("y{i}^2")).collect::<Vec<_>>().join(" + ");
            let mut cfg = tangent_config(name, "free particle on R^d", d, &format!("0.5*({l})"), vec![[-2.0, 2.0]; d]);
            let k: Vec<f64> = (0..d).map(|i| 1.0 / (1 << i) as f64).collect();
            cfg.hj_sections.insert("default".into(), section(k.iter().map(|&v| s(v)).collect(), vec![0.0; d], 1.0));
            cfg.initial = Some(InitialConfig { x0: vec![0.0; d], ya0: k });
            Ok((cfg, Some(Oracle::FreeParticle { d })))
        }
        "pendulum" => {
            Params::new(params, &[])?;
            let pi = std::f64::consts::PI;
            let mut cfg = tangent_config(name, "planar pendulum, L = y^2/2 - (1 - cos x)", 1, "0.5*y1^2 - (1 - cos(x1))", vec![[-pi, pi]]);
            cfg.hj_sections.insert("rotation".into(), section(vec!["sqrt(3 + 2*cos(x1))".into()], vec![0.0], 1.0));
            cfg.initial = Some(InitialConfig { x0: vec![std::f64::consts::FRAC_PI_2], ya0: vec![0.0] });
            Ok((cfg, Some(Oracle::Pendulum)))
        }
        "harmonic-oscillator" => {
            Params::new(params, &[])?;
            let mut cfg = tangent_config(name, "harmonic oscillator, L = (y^2 - x^2)/2", 1, "0.5*y1^2 - 0.5*x1^2", vec![[-1.2, 1.2]]);
            cfg.hj_sections.insert("arc".into(), section(vec!["sqrt(2 - x1^2)".into()], vec![0.0], 1.0));
            cfg.initial = Some(InitialConfig { x0: vec![1.0], ya0: vec![0.0] });
            Ok((cfg, Some(Oracle::HarmonicOscillator)))
        }
        "rigid-body" => {
            let p = Params::new(params, &INERTIA_KEYS)?;
            let (i, named) = inertia(&p)?;
            let cfg = so3_config(name, "free rigid body on so(3), L = w.Iw/2", named);
            Ok((cfg, Some(Oracle::RigidBody { inertia: i })))
        }
        "suslov" => {
            let mut keys = INERTIA_KEYS.to_vec();
            keys.extend(["a1", "a2", "a3"]);
            let p = Params::new(params, &keys)?;
            let (i, named) = inertia(&p)?;
            let axis = Vector3::new(p.get("a1", 0.0), p.get("a2", 0.0), p.get("a3", 1.0));
            if axis.norm() == 0.0 {
                return Err(Error::BadParams("constraint axis must be nonzero".into()));
            }
            let mut cfg = so3_config(name, "Suslov problem: rigid body with a . w = 0", named);
            cfg.r = 2;
            cfg.subbundle = if axis[0] == 0.0 && axis[1] == 0.0 {
                SubbundleSpec::Adapted("adapted:2".into())
            } else {
                let a = nalgebra::DMatrix::from_column_slice(3, 1, (axis / axis.norm()).as_slice());
                let c = linalg::orthogonal_complement(&a);
                SubbundleSpec::Span((0..3).map(|k| (0..2).map(|j| s(c[(k, j)])).collect()).collect())
            };
            cfg.initial = Some(InitialConfig { x0: Vec::new(), ya0: vec![0.3, 0.4] });
            Ok((cfg, Some(Oracle::Suslov { inertia: i, axis })))
        }
        "degenerate-demo" => {
            Params::new(params, &[])?;
            let cfg = ModelConfig {
                name: Some(name.into()),
                description: Some("rank-2 algebroid over R with L = y1^2/2, singular in y2".into()),
                m: 1,
                n: 2,
                r: 2,
                params: BTreeMap::new(),
                anchor: vec![row(&["1", "0"])],
                structure: vec![row(&["0"]), row(&["0"])],
                lagrangian: "0.5*y1^2".into(),
                subbundle: SubbundleSpec::Adapted("adapted:2".into()),
                bounds: vec![[-2.0, 2.0]],
                fiber_range: [-2.0, 2.0],
                hj_sections: BTreeMap::new(),
                initial: Some(InitialConfig { x0: vec![0.0], ya0: vec![1.0, 0.0] }),
            };
            Ok((cfg, None))
        }
        "affine-rank2" => {
            Params::new(params, &[])?;
            let mut cfg = affine_config(name, "1");
            cfg.description = Some("rank-2 algebroid over R with rho = (1, x), [e1, e2] = e1".into());
            Ok((cfg, Some(Oracle::AffineRank2)))
        }
        other => Err(Error::UnknownModel(other.into())),
    }
}

fn affine_config(name: &str, c112: &str) -> ModelConfig {
    ModelConfig {
        name: Some(name.into()),
        description: None,
        m: 1,
        n: 2,
        r: 2,
        params: BTreeMap::new(),
        anchor: vec![row(&["1", "x1"])],
        structure: vec![row(&[c112]), row(&["0"])],
        lagrangian: "0.5*(y1^2 + y2^2) - 0.5*x1^2".into(),
        subbundle: SubbundleSpec::Adapted("adapted:2".into()),
        bounds: vec![[-2.0, 2.0]],
        fiber_range: [-2.0, 2.0],
        hj_sections: BTreeMap::new(),
        initial: Some(InitialConfig { x0: vec![0.5], ya0: vec![1.0, 0.5] }),
    }
}

/// The affine rank-2 model with its bracket switched off, which breaks the
/// structure equations.
pub fn broken_affine() -> ModelConfig {
    let mut cfg = affine_config("affine-rank2-broken", "0");
    cfg.description = Some("affine-rank2 with C = 0; violates the structure equations".into());
    cfg
}

pub fn get_model(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let (cfg, oracle) = model_config(name, params)?;
    let mut bundle = ModelBundle::from_config(cfg)?;
    bundle.oracle = oracle;
    Ok(bundle)
}

fn cross_rhs(i: &Matrix3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    (i * w).cross(w)
}

impl Oracle {
    /// State layout: TQ models `(x, v)`, so(3) models `w`, affine `(x, y1, y2)`.
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Oracle::FreeParticle { d } => {
                let mut out = z[*d..].to_vec();
                out.extend(vec![0.0; *d]);
                out
            }
            Oracle::Pendulum => vec![z[1], -z[0].sin()],
            Oracle::HarmonicOscillator => vec![z[1], -z[0]],
            Oracle::RigidBody { inertia } => {
                let w = Vector3::from_column_slice(z);
                let inv = inertia.try_inverse().expect("positive definite");
                (inv * cross_rhs(inertia, &w)).as_slice().to_vec()
            }
            Oracle::Suslov { inertia, axis } => {
                let w = Vector3::from_column_slice(z);
                let inv = inertia.try_inverse().expect("positive definite");
                let free = inv * cross_rhs(inertia, &w);
                let ia = inv * axis;
                let lambda = -axis.dot(&free) / axis.dot(&ia);
                (free + ia * lambda).as_slice().to_vec()
            }
            Oracle::AffineRank2 => {
                let (x, y1, y2) = (z[0], z[1], z[2]);
                vec![y1 + x * y2, -x - y1 * y2, y1 * y1 - x * x]
            }
        }
    }

    /// Time derivative of the oracle state.
    pub fn derivative(&self, z: &[f64]) -> Vec<f64> {
        self.rhs(z)
    }

    /// Oracle state from a base point and a full velocity.
    pub fn pack(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().chain(y).copied().collect()
    }

    /// `(x, y, p)` from an oracle state.
    pub fn unpack(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self {
            Oracle::FreeParticle { d } => (z[..*d].to_vec(), z[*d..].to_vec(), z[*d..].to_vec()),
            Oracle::Pendulum | Oracle::HarmonicOscillator => (vec![z[0]], vec![z[1]], vec![z[1]]),
            Oracle::RigidBody { inertia } | Oracle::Suslov { inertia, .. } => {
                let w = Vector3::from_column_slice(z);
                (Vec::new(), z.to_vec(), (inertia * w).as_slice().to_vec())
            }
            Oracle::AffineRank2 => (vec![z[0]], z[1..].to_vec(), z[1..].to_vec()),
        }
    }

    /// RK4 reference trajectory from `(x0, y0)` with `y0` the full velocity.
    pub fn trajectory(&self, x0: &[f64], y0: &[f64], h: f64, t_end: f64) -> Result<Trajectory> {
        let steps = (t_end / h).round() as usize;
        let mut z = self.pack(x0, y0);
        let to_state = |z: &[f64]| {
            let (x, y, p) = self.unpack(z);
            State { x: DVector::from_vec(x), y: DVector::from_vec(y), p: DVector::from_vec(p) }
        };
        let axpy = |a: &[f64], k: &[f64], c: f64| a.iter().zip(k).map(|(u, v)| u + c * v).collect::<Vec<_>>();
        let mut times = vec![0.0];
        let mut states = vec![to_state(&z)];
        for k in 1..=steps {
            let k1 = self.rhs(&z);
            let k2 = self.rhs(&axpy(&z, &k1, h / 2.0));
            let k3 = self.rhs(&axpy(&z, &k2, h / 2.0));
            let k4 = self.rhs(&axpy(&z, &k3, h));
            for j in 0..z.len() {
                z[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            let t = k as f64 * h;
            if z.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
                return Err(Error::BlowUp { t });
            }
            times.push(t);
            states.push(to_state(&z));
        }
        Ok(Trajectory { times, states, h, method: Method::Rk4 })
    }
}

/// Reference trajectory of a bundle from `(x0, ya0)` in the bundle's own
/// velocity coordinates.
pub fn oracle_trajectory(bundle: &ModelBundle, x0: &[f64], ya0: &[f64], h: f64, t_end: f64) -> Result<Trajectory> {
    let oracle = bundle.oracle.as_ref().ok_or_else(|| Error::BadParams(format!("model `{}` has no oracle", bundle.name)))?;
    let x = DVector::from_column_slice(x0);
    let y0 = bundle.system.velocity(&x, &DVector::from_column_slice(ya0))?;
    oracle.trajectory(x0, y0.as_slice(), h, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn registry_builds_every_model() {
        for name in MODEL_NAMES {
            let b = get_model(name, &none()).unwrap();
            assert_eq!(b.name, name);
            assert_eq!(b.bounds.len(), b.system.base_dim());
        }
        assert!(matches!(get_model("heavy-top", &none()), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn rigid_body_model() {
        let b = get_model("rigid-body", &none()).unwrap();
        assert_eq!((b.system.base_dim(), b.system.rank(), b.system.constraint_rank()), (0, 3, 3));
        let rhs = b.oracle.as_ref().unwrap().derivative(&[1.0, 1.0, 1.0]);
        assert_eq!(rhs[0], -1.0);
        assert_eq!(rhs[1], 1.0);
        assert!((rhs[2] + 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn bad_params() {
        let p = |k: &str, v: f64| BTreeMap::from([(k.to_string(), v)]);
        assert!(matches!(get_model("rigid-body", &p("I1", -1.0)), Err(Error::BadParams(_))));
        assert!(matches!(get_model("rigid-body", &p("mass", 1.0)), Err(Error::BadParams(_))));
        assert!(matches!(get_model("free-particle", &p("d", 1.5)), Err(Error::BadParams(_))));
        assert!(matches!(get_model("suslov", &p("a3", 0.0)), Err(Error::BadParams(_))));
        assert_eq!(get_model("free-particle", &p("d", 3.0)).unwrap().system.rank(), 3);
    }

    #[test]
    fn suslov_oracle_is_constant_for_diagonal_inertia() {
        let b = get_model("suslov", &none()).unwrap();
        let t = oracle_trajectory(&b, &[], &[0.3, 0.4], 1e-2, 1.0).unwrap();
        assert_eq!(t.final_state().y, DVector::from_column_slice(&[0.3, 0.4, 0.0]));
    }

    #[test]
    fn pendulum_oracle_conserves_energy() {
        let b = get_model("pendulum", &none()).unwrap();
        let quarter = 1.8540746773013719;
        let h = quarter / 1000.0;
        let t = oracle_trajectory(&b, &[std::f64::consts::FRAC_PI_2], &[0.0], h, quarter).unwrap();
        let st = t.final_state();
        let e = 0.5 * st.y[0] * st.y[0] + (1.0 - st.x[0].cos());
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_suslov_axis_uses_span() {
        let p = BTreeMap::from([("a1".to_string(), 1.0), ("a2".to_string(), 1.0), ("a3".to_string(), 1.0)]);
        let b = get_model("suslov", &p).unwrap();
        assert!(!b.system.subbundle.is_adapted());
        let traj = integrate(&b.system, &DVector::zeros(0), &DVector::from_column_slice(&[0.3, 0.4]), 1e-2, 1.0, Method::Rk4).unwrap();
        let oracle = oracle_trajectory(&b, &[], &[0.3, 0.4], 1e-2, 1.0).unwrap();
        assert!((&traj.final_state().y - &oracle.final_state().y).amax() < 1e-9);
    }
}
