//! JSON model description.
//!
//! ```json
//! {
//!   "name": "affine-rank2", "m": 1, "n": 2, "r": 2,
//!   "anchor": [["1", "x1"]],
//!   "structure": [["1"], ["0"]],
//!   "lagrangian": "0.5*(y1^2 + y2^2) - 0.5*x1^2",
//!   "subbundle": "adapted:2",
//!   "box": [[-2, 2]]
//! }
//! ```
//!
//! `structure[g]` lists `C^g_ab` over the pairs `a < b` in lexicographic
//! order.  `subbundle` is either `"adapted:r"` or an `n x r` matrix of
//! expressions in `x`.  Named constants in `params` may appear in every
//! expression.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebroid::{LieAlgebroid, Subbundle};
use crate::dynamics::ImplicitSystem;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::hj::HJSection;
use crate::prolong::Lagrangian;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubbundleSpec {
    /// `"adapted:r"`.
    Adapted(String),
    Span(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub gamma: Vec<String>,
    pub gammabar: Vec<String>,
    /// Default start point of the base flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Default flow horizon.
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub x0: Vec<f64>,
    /// Velocity coordinates along the spanning columns of the subbundle.
    pub ya0: Vec<f64>,
}

fn default_fiber_range() -> [f64; 2] {
    [-2.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub anchor: Vec<Vec<String>>,
    pub structure: Vec<Vec<String>>,
    pub lagrangian: String,
    pub subbundle: SubbundleSpec,
    /// Sampling interval for each base coordinate.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    /// Sampling interval for fiber and dual coordinates.
    #[serde(default = "default_fiber_range")]
    pub fiber_range: [f64; 2],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hj_sections: BTreeMap<String, SectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
}

/// A built section with its default flow data.
#[derive(Debug, Clone)]
pub struct NamedSection {
    pub name: String,
    pub section: HJSection,
    pub x0: Vec<f64>,
    pub t_end: f64,
}

/// Everything built from a config.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub system: ImplicitSystem,
    pub bounds: Vec<(f64, f64)>,
    pub fiber_range: (f64, f64),
    pub sections: Vec<NamedSection>,
}

fn expr(text: &str) -> Result<Expr> {
    parse(text).map_err(|error| Error::Parse { source_text: text.to_string(), error })
}

fn exprs(rows: &[Vec<String>]) -> Result<Vec<Vec<Expr>>> {
    rows.iter().map(|row| row.iter().map(|s| expr(s)).collect()).collect()
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Parse { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<BuiltModel> {
        let (m, n, r) = (self.m, self.n, self.r);
        if r > n {
            return Err(Error::Config(format!("r = {r} exceeds n = {n}")));
        }
        if self.bounds.len() != m {
            return Err(Error::Config(format!("box needs {m} intervals, got {}", self.bounds.len())));
        }
        if self.bounds.iter().chain(std::iter::once(&self.fiber_range)).any(|[lo, hi]| !(lo <= hi)) {
            return Err(Error::Config("sampling intervals must satisfy lo <= hi".into()));
        }
        let alg = LieAlgebroid::new(m, n, &exprs(&self.anchor)?, &exprs(&self.structure)?, &self.params).map_err(config_err)?;
        let lg = Lagrangian::new(&alg, &expr(&self.lagrangian)?).map_err(config_err)?;
        let u = match &self.subbundle {
            SubbundleSpec::Adapted(text) => {
                let k: usize = text
                    .strip_prefix("adapted:")
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("subbundle `{text}` is not of the form adapted:r")))?;
                if k != r {
                    return Err(Error::Config(format!("subbundle rank {k} differs from r = {r}")));
                }
                Subbundle::adapted(&alg, k).map_err(config_err)?
            }
            SubbundleSpec::Span(rows) => {
                if rows.len() != n || rows.iter().any(|row| row.len() != r) {
                    return Err(Error::Config(format!("subbundle span must be {n} x {r}")));
                }
                Subbundle::from_span(&alg, &exprs(rows)?).map_err(config_err)?
            }
        };
        let system = ImplicitSystem::new(alg, lg, u).map_err(config_err)?;
        let mut sections = Vec::new();
        for (name, sc) in &self.hj_sections {
            let g = sc.gamma.iter().map(|s| expr(s)).collect::<Result<Vec<_>>>()?;
            let gb = sc.gammabar.iter().map(|s| expr(s)).collect::<Result<Vec<_>>>()?;
            let section = HJSection::new(&system, &g, &gb).map_err(config_err)?;
            let x0 = sc.x0.clone().unwrap_or_else(|| vec![0.0; m]);
            if x0.len() != m {
                return Err(Error::Config(format!("section `{name}`: x0 needs {m} coordinates")));
            }
            sections.push(NamedSection { name: name.clone(), section, x0, t_end: sc.t_end.unwrap_or(1.0) });
        }
        if let Some(init) = &self.initial {
            if init.x0.len() != m || init.ya0.len() != r {
                return Err(Error::Config(format!("initial condition needs {m} base and {r} velocity coordinates")));
            }
        }
        Ok(BuiltModel {
            system,
            bounds: self.bounds.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            fiber_range: (self.fiber_range[0], self.fiber_range[1]),
            sections,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFFINE: &str = r#"{
        "name": "affine-rank2", "m": 1, "n": 2, "r": 2,
        "anchor": [["1", "x1"]],
        "structure": [["1"], ["0"]],
        "lagrangian": "0.5*(y1^2 + y2^2) - 0.5*x1^2",
        "subbundle": "adapted:2",
        "box": [[-2, 2]]
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ModelConfig::from_json(AFFINE).unwrap();
        assert_eq!(cfg.fiber_range, [-2.0, 2.0]);
        let built = cfg.build().unwrap();
        assert_eq!((built.system.base_dim(), built.system.rank(), built.system.constraint_rank()), (1, 2, 2));
        assert!(built.system.subbundle.is_adapted());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ModelConfig::from_json(AFFINE).unwrap();
        cfg.subbundle = SubbundleSpec::Span(vec![vec!["1".into()], vec!["x1".into()]]);
        cfg.r = 1;
        cfg.hj_sections.insert(
            "s".into(),
            SectionConfig { gamma: vec!["1".into(), "0".into()], gammabar: vec!["1".into(), "0".into()], x0: Some(vec![0.5]), t_end: None },
        );
        let back = ModelConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.build().unwrap().sections[0].x0, vec![0.5]);
    }

    #[test]
    fn rejects_malformed_configs() {
        let bad = |edit: &dyn Fn(&mut ModelConfig)| {
            let mut cfg = ModelConfig::from_json(AFFINE).unwrap();
            edit(&mut cfg);
            cfg.build().unwrap_err()
        };
        assert!(matches!(bad(&|c| c.lagrangian = "y1 +".into()), Error::Parse { .. }));
        assert!(matches!(bad(&|c| c.lagrangian = "q1".into()), Error::Config(_)));
        assert!(matches!(bad(&|c| c.anchor = vec![vec!["1".into()]]), Error::Config(_)));
        assert!(matches!(bad(&|c| c.subbundle = SubbundleSpec::Adapted("adapted:x".into())), Error::Config(_)));
        assert!(matches!(bad(&|c| c.bounds.clear()), Error::Config(_)));
        assert!(ModelConfig::from_json(r#"{"m": 1}"#).is_err());
        assert!(ModelConfig::from_json(&AFFINE.replace("\"r\": 2", "\"r\": 2, \"extra\": 1")).is_err());
    }
}
