use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Which hypothesis of a Hamilton-Jacobi check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Section value outside the constraint subbundle.
    InSubbundle,
    /// Dual part differs from the Legendre transform of the velocity part.
    Legendre,
    /// Dual part not closed on the constraint subbundle.
    Closedness,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::InSubbundle => "section lies in the constraint subbundle",
            Hypothesis::Legendre => "dual part is the Legendre transform of the velocity part",
            Hypothesis::Closedness => "dual part is closed on the constraint subbundle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error in `{source_text}`: {error}")]
    Parse { source_text: String, error: ParseError },
    #[error("evaluation fault at {point:?}: {error}")]
    Eval { point: Vec<f64>, error: EvalError },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rank deficient: expected rank {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("degenerate Lagrangian on the constraint subbundle: restricted Hessian condition number {condition:.3e}")]
    Degenerate { condition: f64 },
    #[error("Newton iteration diverged at step {step} (last residual {residual:.3e})")]
    NewtonDivergence { step: usize, residual: f64 },
    #[error("hypothesis violated ({which}): worst value {value:.3e} at {point:?}")]
    HypothesisViolated { which: Hypothesis, point: Vec<f64>, value: f64 },
    #[error("trajectory blew up at t = {t} (|x| > 1e6)")]
    BlowUp { t: f64 },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("bad model parameters: {0}")]
    BadParams(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn eval_at(point: &[f64]) -> impl FnOnce(EvalError) -> Error + '_ {
        move |error| Error::Eval { point: point.to_vec(), error }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
