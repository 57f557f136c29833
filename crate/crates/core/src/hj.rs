//! Hamilton-Jacobi sections `x -> (gamma(x), gammabar(x))` of `E + E*`.
//!
//! A section qualifies when `gamma` lies in `U`, `gammabar` is the Legendre
//! transform of `gamma` and `d^E gammabar` vanishes on `U x U`.  For such a
//! section the base curves of `xdot = rho(x) gamma(x)` lift to solutions of the
//! implicit system exactly when
//!
//! ```text
//! (gamma^b d gammabar_b/dx^i - dL/dx^i(x, gamma(x))) rho^i_a u^a = 0   for u in U.
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebroid::{BasePoint, FiberPoint, ScalarField, DEFAULT_RANK_TOL};
use crate::dynamics::{residual, ImplicitSystem, State};
use crate::error::{Error, Hypothesis, Result};
use crate::expr::Expr;

/// Tolerance on the section hypotheses, relative to the section's size.
pub const HYPOTHESIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HJSection {
    gamma: Vec<ScalarField>,
    gammabar: Vec<ScalarField>,
}

impl HJSection {
    pub fn new(sys: &ImplicitSystem, gamma: &[Expr], gammabar: &[Expr]) -> Result<Self> {
        let n = sys.rank();
        if gamma.len() != n || gammabar.len() != n {
            return Err(Error::Dimension(format!("section needs {n} + {n} components")));
        }
        let scope = sys.alg.base_scope();
        let compile = |es: &[Expr]| es.iter().map(|e| ScalarField::new(e, &scope)).collect::<Result<Vec<_>>>();
        Ok(HJSection { gamma: compile(gamma)?, gammabar: compile(gammabar)? })
    }

    pub fn gamma_exprs(&self) -> Vec<Expr> {
        self.gamma.iter().map(|f| f.expr().clone()).collect()
    }

    pub fn gammabar_exprs(&self) -> Vec<Expr> {
        self.gammabar.iter().map(|f| f.expr().clone()).collect()
    }

    pub fn gamma_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        eval_all(&self.gamma, x)
    }

    pub fn gammabar_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        eval_all(&self.gammabar, x)
    }

    /// Values and base Jacobian `J[(a, i)] = d gammabar_a / dx^i`.
    pub fn gammabar_jet(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let m = x.len();
        let wrt: Vec<usize> = (0..m).collect();
        let n = self.gammabar.len();
        let mut vals = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, m);
        for (a, f) in self.gammabar.iter().enumerate() {
            let (v, g) = f.grad(x.as_slice(), &wrt)?;
            vals[a] = v;
            jac.row_mut(a).copy_from_slice(&g);
        }
        Ok((vals, jac))
    }
}

fn eval_all(fs: &[ScalarField], x: &DVector<f64>) -> Result<DVector<f64>> {
    let vals = fs.iter().map(|f| f.eval(x.as_slice())).collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InK {
    pub in_u: bool,
    pub distance_from_u: f64,
    pub legendre_gap: f64,
}

pub fn check_in_k(sys: &ImplicitSystem, s: &HJSection, x: &BasePoint, tol: f64) -> Result<InK> {
    let gamma = s.gamma_at(&x.x)?;
    let distance_from_u = sys.subbundle.distance(&x.x, &gamma, DEFAULT_RANK_TOL)?;
    let (_, _, ly) = sys.lagrangian.gradient(&FiberPoint { x: x.x.clone(), y: gamma.clone() })?;
    let legendre_gap = (s.gammabar_at(&x.x)? - ly).amax();
    Ok(InK { in_u: distance_from_u <= tol * (1.0 + gamma.norm()), distance_from_u, legendre_gap })
}

/// `d^E gammabar` on pairs of spanning columns of `U`, as an antisymmetric
/// `r x r` matrix.
pub fn closedness_form(sys: &ImplicitSystem, s: &HJSection, x: &BasePoint) -> Result<DMatrix<f64>> {
    let (vals, jac) = s.gammabar_jet(&x.x)?;
    let d = sys.alg.d_one_section_from_jet(&vals, &jac, x)?;
    let span = sys.subbundle.span_at(&x.x)?;
    let r = span.ncols();
    let mut b = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in (i + 1)..r {
            let v = (span.column(i).transpose() * &d * span.column(j))[(0, 0)];
            b[(i, j)] = v;
            b[(j, i)] = -v;
        }
    }
    Ok(b)
}

/// Largest entry of [`closedness_form`].
pub fn check_closedness(sys: &ImplicitSystem, s: &HJSection, x: &BasePoint) -> Result<f64> {
    Ok(closedness_form(sys, s, x)?.amax())
}

/// One component per spanning column of `U`.
pub fn hj_residual(sys: &ImplicitSystem, s: &HJSection, x: &BasePoint) -> Result<DVector<f64>> {
    let gamma = s.gamma_at(&x.x)?;
    let (_, jac) = s.gammabar_jet(&x.x)?;
    let (_, lx, _) = sys.lagrangian.gradient(&FiberPoint { x: x.x.clone(), y: gamma.clone() })?;
    let covector = jac.transpose() * &gamma - lx;
    let rho_s = sys.alg.anchor_at(&x.x)? * sys.subbundle.span_at(&x.x)?;
    Ok(rho_s.transpose() * covector)
}

#[derive(Debug, Clone)]
pub struct BaseTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub h: f64,
}

/// RK4 on `cdot = rho(c) gamma(c)`.
pub fn base_flow(sys: &ImplicitSystem, s: &HJSection, x0: &BasePoint, h: f64, t_end: f64) -> Result<BaseTrajectory> {
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Dimension(format!("need h > 0 and T >= 0, got h = {h}, T = {t_end}")));
    }
    let steps = (t_end / h).round() as usize;
    let field = |c: &DVector<f64>| -> Result<DVector<f64>> { Ok(sys.alg.anchor_at(c)? * s.gamma_at(c)?) };
    let mut c = x0.x.clone();
    let mut times = vec![0.0];
    let mut points = vec![c.clone()];
    for k in 1..=steps {
        let k1 = field(&c)?;
        let k2 = field(&(&c + &k1 * (h / 2.0)))?;
        let k3 = field(&(&c + &k2 * (h / 2.0)))?;
        let k4 = field(&(&c + &k3 * h))?;
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let t = k as f64 * h;
        if !c.iter().all(|v| v.is_finite()) || c.amax() > 1e6 {
            return Err(Error::BlowUp { t });
        }
        times.push(t);
        points.push(c.clone());
    }
    Ok(BaseTrajectory { times, points, h })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub hj_pass: bool,
    pub lift_pass: bool,
    pub consistent: bool,
    pub max_hj_residual: f64,
    pub max_lift_residual: f64,
    pub lift_tol: f64,
}

/// Second-order finite differences: centered inside, one-sided at the ends.
fn fd2(values: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    let n = values.len();
    (0..n)
        .map(|k| match (k, n) {
            (_, 0 | 1) => DVector::zeros(values[k].len()),
            (_, 2) => (&values[1] - &values[0]) / h,
            (0, _) => (&values[0] * -3.0 + &values[1] * 4.0 - &values[2]) / (2.0 * h),
            (k, n) if k == n - 1 => (&values[k] * 3.0 - &values[k - 1] * 4.0 + &values[k - 2]) / (2.0 * h),
            (k, _) => (&values[k + 1] - &values[k - 1]) / (2.0 * h),
        })
        .collect()
}

/// Check the hypotheses at every node of the base flow, then compare the HJ
/// residual with the residual of the lifted curve `(c, gamma(c), gammabar(c))`.
pub fn verify_theorem(sys: &ImplicitSystem, s: &HJSection, x0: &BasePoint, h: f64, t_end: f64, tol: f64) -> Result<Verdict> {
    let flow = base_flow(sys, s, x0, h, t_end)?;
    let mut states = Vec::with_capacity(flow.points.len());
    let mut max_hj = 0.0f64;
    for c in &flow.points {
        let pt = BasePoint { x: c.clone() };
        let k = check_in_k(sys, s, &pt, HYPOTHESIS_TOL)?;
        let gamma = s.gamma_at(c)?;
        let gammabar = s.gammabar_at(c)?;
        let scale = 1.0 + gamma.amax().max(gammabar.amax());
        let violated = |which, value| Error::HypothesisViolated { which, point: c.iter().copied().collect(), value };
        if !k.in_u {
            return Err(violated(Hypothesis::InSubbundle, k.distance_from_u));
        }
        if k.legendre_gap > HYPOTHESIS_TOL * scale {
            return Err(violated(Hypothesis::Legendre, k.legendre_gap));
        }
        let closed = check_closedness(sys, s, &pt)?;
        if closed > HYPOTHESIS_TOL * scale {
            return Err(violated(Hypothesis::Closedness, closed));
        }
        max_hj = max_hj.max(hj_residual(sys, s, &pt)?.amax());
        states.push(State { x: c.clone(), y: gamma, p: gammabar });
    }
    let xs: Vec<_> = states.iter().map(|st| st.x.clone()).collect();
    let ps: Vec<_> = states.iter().map(|st| st.p.clone()).collect();
    let (xdot, pdot) = (fd2(&xs, h), fd2(&ps, h));
    let scale = states.iter().map(|st| st.x.amax().max(st.y.amax()).max(st.p.amax())).fold(0.0, f64::max);
    let lift_tol = tol + 10.0 * h * h * (1.0 + scale);
    let mut max_lift = 0.0f64;
    for (st, (xd, pd)) in states.iter().zip(xdot.iter().zip(&pdot)) {
        let r = residual(sys, st, xd, pd, lift_tol)?;
        max_lift = max_lift.max(r.r_kin.max(r.r_mom).max(r.r_leg).max(r.r_u));
    }
    let hj_pass = max_hj <= tol;
    let lift_pass = max_lift <= lift_tol;
    Ok(Verdict { hj_pass, lift_pass, consistent: hj_pass == lift_pass, max_hj_residual: max_hj, max_lift_residual: max_lift, lift_tol })
}
