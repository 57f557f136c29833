//! Implicit Lagrangian systems `(L, U)` on an algebroid and their integrators.
//!
//! A curve `(x, y, p)` solves the system when
//!
//! ```text
//! xdot = rho(x) y,   y in U(x),   p = dL/dy(x, y),
//! pdot + Cp y - rho^T dL/dx  annihilates U(x).
//! ```
//!
//! Velocities are parametrized by the spanning columns of `U`: `y = S(x) ya`.
//! The explicit path solves the momentum equation for `ya'` and runs RK4 on
//! `(x, ya)`; momenta are recomputed from the Legendre map at every node.  The
//! implicit path runs the midpoint rule with Newton on the full system,
//! including the Legendre constraint, and so tolerates Lagrangians that are
//! degenerate on `U` whenever the discrete equations stay solvable.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebroid::{FiberPoint, LieAlgebroid, Subbundle, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::prolong::{energies, Lagrangian};

/// Restricted Hessians at or above this condition number are rejected.
pub const DEGENERACY_THRESHOLD: f64 = 1e12;
pub const NEWTON_MAX_ITER: usize = 25;
pub const NEWTON_TOL: f64 = 1e-11;
const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct ImplicitSystem {
    pub alg: LieAlgebroid,
    pub lagrangian: Lagrangian,
    pub subbundle: Subbundle,
}

impl ImplicitSystem {
    pub fn new(alg: LieAlgebroid, lagrangian: Lagrangian, subbundle: Subbundle) -> Result<Self> {
        if subbundle.fiber_rank() != alg.rank() {
            return Err(Error::Dimension("subbundle and algebroid ranks differ".into()));
        }
        Ok(ImplicitSystem { alg, lagrangian, subbundle })
    }

    pub fn base_dim(&self) -> usize {
        self.alg.base_dim()
    }

    pub fn rank(&self) -> usize {
        self.alg.rank()
    }

    pub fn constraint_rank(&self) -> usize {
        self.subbundle.rank()
    }

    /// Full velocity `S(x) ya`.
    pub fn velocity(&self, x: &DVector<f64>, ya: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.subbundle.span_at(x)? * ya)
    }

    /// The state `(x, S ya, dL/dy)` on the Legendre graph.
    pub fn state(&self, x: &DVector<f64>, ya: &DVector<f64>) -> Result<State> {
        let y = self.velocity(x, ya)?;
        let (_, _, p) = self.lagrangian.gradient(&FiberPoint { x: x.clone(), y: y.clone() })?;
        Ok(State { x: x.clone(), y, p })
    }

    /// `E_L = p.y - L` at a state.
    pub fn energy(&self, st: &State) -> Result<f64> {
        Ok(energies(&self.lagrangian, &st.fiber(), Some(&st.p))?.e_l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub p: DVector<f64>,
}

impl State {
    pub fn fiber(&self) -> FiberPoint {
        FiberPoint { x: self.x.clone(), y: self.y.clone() }
    }

    fn scale(&self) -> f64 {
        1.0f64.max(self.x.amax()).max(self.y.amax()).max(self.p.amax())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    ImplicitMidpoint,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "implicit_midpoint" | "implicit-midpoint" | "midpoint" => Ok(Method::ImplicitMidpoint),
            _ => Err(format!("unknown method `{s}` (expected rk4 or implicit-midpoint)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub h: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub r_u: f64,
    pub r_kin: f64,
    pub r_leg: f64,
    pub r_mom: f64,
    pub pass: bool,
}

/// Residuals of the implicit equations at `st` for given time derivatives.
pub fn residual(sys: &ImplicitSystem, st: &State, xdot: &DVector<f64>, pdot: &DVector<f64>, tol: f64) -> Result<Residual> {
    let x = &st.x;
    let r_u = sys.subbundle.distance(x, &st.y, DEFAULT_RANK_TOL)?;
    let local = sys.alg.local(x)?;
    let r_kin = (xdot - &local.rho * &st.y).amax();
    let (_, lx, ly) = sys.lagrangian.gradient(&st.fiber())?;
    let r_leg = (&st.p - ly).amax();
    let force = pdot + local.c.contract(&st.p) * &st.y - local.rho.transpose() * lx;
    let s = sys.subbundle.span_at(x)?;
    let r_mom = (s.transpose() * force).amax();
    let pass = r_u <= tol && r_kin <= tol && r_leg <= tol && r_mom <= tol;
    Ok(Residual { r_u, r_kin, r_leg, r_mom, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedRhs {
    pub xdot: DVector<f64>,
    pub ydot_a: DVector<f64>,
    pub p: DVector<f64>,
    pub pdot: DVector<f64>,
}

/// Explicit right-hand side on `(x, ya)`: the kinematic equation, and the
/// momentum equation projected on `U` and differentiated through the Legendre
/// map, `S^T L_yy S ya' = S^T (rho^T L_x - Cp y - L_yx xdot - L_yy S' ya)`.
pub fn adapted_rhs(sys: &ImplicitSystem, x: &DVector<f64>, ya: &DVector<f64>) -> Result<AdaptedRhs> {
    let (s, ds) = sys.subbundle.span_jet(x)?;
    if ya.len() != s.ncols() || x.len() != sys.base_dim() {
        return Err(Error::Dimension(format!("expected {} base and {} constrained coordinates", sys.base_dim(), s.ncols())));
    }
    let y = &s * ya;
    let local = sys.alg.local(x)?;
    let jet = sys.lagrangian.jet(&FiberPoint { x: x.clone(), y: y.clone() })?;
    let xdot = &local.rho * &y;
    let mut sdot = DMatrix::zeros(s.nrows(), s.ncols());
    for (j, d) in ds.iter().enumerate() {
        sdot += d * xdot[j];
    }
    let drift = &sdot * ya;
    let m = s.transpose() * &jet.dyy * &s;
    let condition = linalg::condition_number(&m);
    if !(condition < DEGENERACY_THRESHOLD) {
        return Err(Error::Degenerate { condition });
    }
    let force = local.rho.transpose() * &jet.dx - local.c.contract(&jet.dy) * &y - &jet.dyx * &xdot - &jet.dyy * &drift;
    let ydot_a = m.lu().solve(&(s.transpose() * force)).ok_or(Error::Degenerate { condition: f64::INFINITY })?;
    let ydot = &s * &ydot_a + drift;
    let pdot = &jet.dyx * &xdot + &jet.dyy * ydot;
    Ok(AdaptedRhs { xdot, ydot_a, p: jet.dy, pdot })
}

fn step_count(h: f64, t_end: f64) -> Result<usize> {
    if !(h > 0.0) || !(t_end >= 0.0) || !h.is_finite() || !t_end.is_finite() {
        return Err(Error::Dimension(format!("need h > 0 and T >= 0, got h = {h}, T = {t_end}")));
    }
    let n = (t_end / h).round();
    if (n * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Dimension(format!("T = {t_end} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

fn check_bounded(st: &State, t: f64) -> Result<()> {
    let finite = st.x.iter().chain(st.y.iter()).chain(st.p.iter()).all(|v| v.is_finite());
    if !finite || st.x.amax() > BLOW_UP {
        return Err(Error::BlowUp { t });
    }
    Ok(())
}

/// Integrate from `(x0, ya0)` over `[0, T]` with fixed step `h`.
pub fn integrate(sys: &ImplicitSystem, x0: &DVector<f64>, ya0: &DVector<f64>, h: f64, t_end: f64, method: Method) -> Result<Trajectory> {
    let steps = step_count(h, t_end)?;
    if x0.len() != sys.base_dim() || ya0.len() != sys.constraint_rank() {
        return Err(Error::Dimension(format!(
            "initial condition needs {} base and {} constrained velocity coordinates",
            sys.base_dim(),
            sys.constraint_rank()
        )));
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let first = sys.state(x0, ya0)?;
    check_bounded(&first, 0.0)?;
    times.push(0.0);
    states.push(first);
    let (mut x, mut ya) = (x0.clone(), ya0.clone());
    let mut jacobian = None;
    for k in 1..=steps {
        let t = k as f64 * h;
        let st = match method {
            Method::Rk4 => {
                (x, ya) = rk4_step(sys, &x, &ya, h)?;
                sys.state(&x, &ya)?
            }
            Method::ImplicitMidpoint => {
                let prev = states.last().expect("non-empty");
                let (x1, ya1, p1) = midpoint_step(sys, prev, &ya, h, k, &mut jacobian)?;
                (x, ya) = (x1, ya1);
                let y = sys.velocity(&x, &ya)?;
                State { x: x.clone(), y, p: p1 }
            }
        };
        check_bounded(&st, t)?;
        times.push(t);
        states.push(st);
    }
    Ok(Trajectory { times, states, h, method })
}

fn rk4_step(sys: &ImplicitSystem, x: &DVector<f64>, ya: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = |x: &DVector<f64>, ya: &DVector<f64>| adapted_rhs(sys, x, ya).map(|r| (r.xdot, r.ydot_a));
    let (k1x, k1y) = f(x, ya)?;
    let (k2x, k2y) = f(&(x + &k1x * (h / 2.0)), &(ya + &k1y * (h / 2.0)))?;
    let (k3x, k3y) = f(&(x + &k2x * (h / 2.0)), &(ya + &k2y * (h / 2.0)))?;
    let (k4x, k4y) = f(&(x + &k3x * h), &(ya + &k3y * h))?;
    let x1 = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let ya1 = ya + (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
    Ok((x1, ya1))
}

/// Residual of one midpoint step in the unknowns `(x1, ya1, p1)`.
fn midpoint_equations(sys: &ImplicitSystem, prev: &State, ya0: &DVector<f64>, h: f64, w: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n, r) = (sys.base_dim(), sys.rank(), sys.constraint_rank());
    let x1 = w.rows(0, m).into_owned();
    let ya1 = w.rows(m, r).into_owned();
    let p1 = w.rows(m + r, n).into_owned();
    let xm = (&prev.x + &x1) * 0.5;
    let yam = (ya0 + &ya1) * 0.5;
    let pm = (&prev.p + &p1) * 0.5;
    let sm = sys.subbundle.span_at(&xm)?;
    let ym = &sm * &yam;
    let local = sys.alg.local(&xm)?;
    let (_, lx, _) = sys.lagrangian.gradient(&FiberPoint { x: xm.clone(), y: ym.clone() })?;
    let y1 = sys.velocity(&x1, &ya1)?;
    let (_, _, ly1) = sys.lagrangian.gradient(&FiberPoint { x: x1.clone(), y: y1 })?;

    let kin = (&x1 - &prev.x) / h - &local.rho * &ym;
    let leg = &p1 - ly1;
    let mom = sm.transpose() * ((&p1 - &prev.p) / h + local.c.contract(&pm) * &ym - local.rho.transpose() * lx);
    let mut out = DVector::zeros(m + n + r);
    out.rows_mut(0, m).copy_from(&kin);
    out.rows_mut(m, n).copy_from(&leg);
    out.rows_mut(m + n, r).copy_from(&mom);
    Ok(out)
}

/// One Newton solve of the midpoint equations.  The Jacobian in `cache` is
/// reused across iterations and steps and refreshed when a step stalls.
fn midpoint_step(
    sys: &ImplicitSystem,
    prev: &State,
    ya0: &DVector<f64>,
    h: f64,
    step: usize,
    cache: &mut Option<DMatrix<f64>>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let (m, n, r) = (sys.base_dim(), sys.rank(), sys.constraint_rank());
    let mut w = DVector::zeros(m + r + n);
    w.rows_mut(0, m).copy_from(&prev.x);
    w.rows_mut(m, r).copy_from(ya0);
    w.rows_mut(m + r, n).copy_from(&prev.p);
    let eqs = |w: &DVector<f64>| midpoint_equations(sys, prev, ya0, h, w);
    let mut f = eqs(&w)?;
    let mut fresh = false;
    for _ in 0..=NEWTON_MAX_ITER {
        let norm = f.amax();
        if norm <= NEWTON_TOL * (1.0 + w.amax()) {
            let x1 = w.rows(0, m).into_owned();
            let ya1 = w.rows(m, r).into_owned();
            let p1 = w.rows(m + r, n).into_owned();
            return Ok((x1, ya1, p1));
        }
        let diverged = Error::NewtonDivergence { step, residual: norm };
        if cache.is_none() {
            let jac = fd_jacobian(&eqs, &w)?;
            if linalg::condition_number(&jac) >= 1e14 {
                return Err(diverged);
            }
            *cache = Some(jac);
            fresh = true;
        }
        let jac = cache.as_ref().expect("set above");
        let delta = jac.clone().lu().solve(&(-&f)).ok_or(diverged.clone())?;
        // A stale Jacobian must at least halve the residual.
        let target = if fresh { norm } else { 0.5 * norm };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-10 {
            let trial = &w + &delta * lambda;
            let ft = eqs(&trial)?;
            if ft.amax() < target {
                w = trial;
                f = ft;
                accepted = true;
                break;
            }
            if !fresh {
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if fresh {
                return Err(diverged);
            }
            *cache = None;
        }
    }
    Err(Error::NewtonDivergence { step, residual: f.amax() })
}

/// Central-difference Jacobian.
fn fd_jacobian(f: &impl Fn(&DVector<f64>) -> Result<DVector<f64>>, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let k = w.len();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let eps = 1e-6 * (1.0 + w[j].abs());
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[j] += eps;
        wm[j] -= eps;
        let col = (f(&wp)? - f(&wm)?) / (2.0 * eps);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyDrift {
    #[serde(rename = "E0")]
    pub e0: f64,
    pub max_abs_drift: f64,
}

pub fn energy_drift(sys: &ImplicitSystem, traj: &Trajectory) -> Result<EnergyDrift> {
    let mut e0 = None;
    let mut drift = 0.0f64;
    for st in &traj.states {
        let e = sys.energy(st)?;
        let base = *e0.get_or_insert(e);
        drift = drift.max((e - base).abs());
    }
    Ok(EnergyDrift { e0: e0.unwrap_or(0.0), max_abs_drift: drift })
}

/// Weights of the derivative at offset `at` of the interpolating polynomial
/// through the nodes at integer `offsets`, for unit spacing.
fn fd_weights(offsets: &[i32], at: i32) -> Vec<f64> {
    let t = at as f64;
    offsets
        .iter()
        .enumerate()
        .map(|(j, &oj)| {
            let oj = oj as f64;
            let denom: f64 = offsets.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &ok)| oj - ok as f64).product();
            let mut num = 0.0;
            for l in (0..offsets.len()).filter(|&l| l != j) {
                let prod: f64 = offsets
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j && k != l)
                    .map(|(_, &ok)| t - ok as f64)
                    .product();
                num += prod;
            }
            num / denom
        })
        .collect()
}

/// Finite-difference time derivatives of `field` along the trajectory, from
/// a five-node window (centered where possible, one-sided near the ends).
pub fn fd_derivative(traj: &Trajectory, field: impl Fn(&State) -> DVector<f64>) -> Vec<DVector<f64>> {
    let count = traj.states.len();
    let width = count.min(5);
    let values: Vec<_> = traj.states.iter().map(field).collect();
    (0..count)
        .map(|k| {
            if width < 2 {
                return DVector::zeros(values[k].len());
            }
            let start = k.saturating_sub(width / 2).min(count - width);
            let offsets: Vec<i32> = (0..width).map(|j| (start + j) as i32 - k as i32).collect();
            let w = fd_weights(&offsets, 0);
            let mut d = DVector::zeros(values[k].len());
            for (j, wj) in w.iter().enumerate() {
                d += &values[start + j] * *wj;
            }
            d / traj.h
        })
        .collect()
}

/// Residuals at every node with finite-difference `xdot`, `pdot`.
pub fn trajectory_residuals(sys: &ImplicitSystem, traj: &Trajectory, tol: f64) -> Result<Vec<Residual>> {
    let xdot = fd_derivative(traj, |s| s.x.clone());
    let pdot = fd_derivative(traj, |s| s.p.clone());
    traj.states
        .iter()
        .zip(xdot.iter().zip(&pdot))
        .map(|(st, (xd, pd))| residual(sys, st, xd, pd, tol * st.scale()))
        .collect()
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectories contain the initial state")
    }

    /// CSV with header `t,x1..xm,y1..yn,p1..pn,E_L,res_kin,res_mom`.
    pub fn to_csv(&self, sys: &ImplicitSystem) -> Result<String> {
        let (m, n) = (sys.base_dim(), sys.rank());
        let mut out = String::from("t");
        for (prefix, count) in [("x", m), ("y", n), ("p", n)] {
            for i in 1..=count {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push_str(",E_L,res_kin,res_mom\n");
        let res = trajectory_residuals(sys, self, 0.0)?;
        for ((t, st), r) in self.times.iter().zip(&self.states).zip(&res) {
            let _ = write!(out, "{t:.16e}");
            for v in st.x.iter().chain(st.y.iter()).chain(st.p.iter()) {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{:.16e},{:.16e},{:.16e}", sys.energy(st)?, r.r_kin, r.r_mom);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    fn rigid_body(r: usize) -> ImplicitSystem {
        let alg = LieAlgebroid::so3();
        let lg = Lagrangian::new(&alg, &parse("0.5*(y1^2 + 2*y2^2 + 3*y3^2)").unwrap()).unwrap();
        let u = Subbundle::adapted(&alg, r).unwrap();
        ImplicitSystem::new(alg, lg, u).unwrap()
    }

    fn tq(l: &str) -> ImplicitSystem {
        let alg = LieAlgebroid::tangent(1);
        let lg = Lagrangian::new(&alg, &parse(l).unwrap()).unwrap();
        let u = Subbundle::full(&alg);
        ImplicitSystem::new(alg, lg, u).unwrap()
    }

    fn degenerate() -> ImplicitSystem {
        let alg = LieAlgebroid::new(
            1,
            2,
            &[vec![parse("1").unwrap(), parse("0").unwrap()]],
            &[vec![parse("0").unwrap()], vec![parse("0").unwrap()]],
            &Default::default(),
        )
        .unwrap();
        let lg = Lagrangian::new(&alg, &parse("0.5*y1^2").unwrap()).unwrap();
        let u = Subbundle::full(&alg);
        ImplicitSystem::new(alg, lg, u).unwrap()
    }

    #[test]
    fn fd_weights_match_known_stencils() {
        let close = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14);
        assert!(close(fd_weights(&[-2, -1, 0, 1, 2], 0), &[1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0]));
        assert!(close(fd_weights(&[0, 1, 2, 3, 4], 0), &[-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25]));
        assert!(close(fd_weights(&[0, 1], 0), &[-1.0, 1.0]));
    }

    #[test]
    fn rigid_body_residual_example() {
        let sys = rigid_body(3);
        let st = State { x: v(&[]), y: v(&[1.0, 1.0, 1.0]), p: v(&[1.0, 2.0, 3.0]) };
        let r = residual(&sys, &st, &v(&[]), &v(&[-1.0, 2.0, -1.0]), 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.r_mom, 0.0);
    }

    #[test]
    fn suslov_constant_state_residual() {
        let sys = rigid_body(2);
        let st = State { x: v(&[]), y: v(&[0.3, 0.4, 0.0]), p: v(&[0.3, 0.8, 0.0]) };
        assert!(residual(&sys, &st, &v(&[]), &v(&[0.0; 3]), 1e-12).unwrap().pass);
    }

    #[test]
    fn residual_flags_velocity_outside_u() {
        let sys = rigid_body(2);
        let st = State { x: v(&[]), y: v(&[0.3, 0.4, 0.5]), p: v(&[0.3, 0.8, 1.5]) };
        let r = residual(&sys, &st, &v(&[]), &v(&[0.0; 3]), 1e-12).unwrap();
        assert!(!r.pass);
        assert!((r.r_u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn adapted_rhs_examples() {
        let rb = adapted_rhs(&rigid_body(3), &v(&[]), &v(&[1.0, 1.0, 1.0])).unwrap();
        assert!((rb.ydot_a - v(&[-1.0, 1.0, -1.0 / 3.0])).amax() < 1e-15);
        assert_eq!(rb.p, v(&[1.0, 2.0, 3.0]));

        let pend = tq("0.5*y1^2 - (1 - cos(x1))");
        let r = adapted_rhs(&pend, &v(&[std::f64::consts::FRAC_PI_2]), &v(&[0.0])).unwrap();
        assert!((r.ydot_a[0] + 1.0).abs() < 1e-15);

        let err = adapted_rhs(&degenerate(), &v(&[0.0]), &v(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn rigid_body_rk4_conserves_energy_and_legendre() {
        let sys = rigid_body(3);
        let traj = integrate(&sys, &v(&[]), &v(&[1.0, 1.0, 1.0]), 1e-2, 1.0, Method::Rk4).unwrap();
        assert_eq!(traj.states.len(), 101);
        let d = energy_drift(&sys, &traj).unwrap();
        assert_eq!(d.e0, 3.0);
        assert!(d.max_abs_drift < 1e-8, "{d:?}");
        for st in &traj.states {
            let (_, _, ly) = sys.lagrangian.gradient(&st.fiber()).unwrap();
            assert_eq!(st.p, ly);
        }
    }

    #[test]
    fn midpoint_agrees_with_rk4_on_pendulum() {
        let sys = tq("0.5*y1^2 - (1 - cos(x1))");
        let a = integrate(&sys, &v(&[1.0]), &v(&[0.0]), 1e-3, 1.0, Method::Rk4).unwrap();
        let b = integrate(&sys, &v(&[1.0]), &v(&[0.0]), 1e-3, 1.0, Method::ImplicitMidpoint).unwrap();
        assert!((&a.final_state().x - &b.final_state().x).amax() < 1e-6);
        let res = trajectory_residuals(&sys, &b, 1e-5).unwrap();
        assert!(res.iter().all(|r| r.pass));
    }

    #[test]
    fn degenerate_midpoint_reports_divergence() {
        let err = integrate(&degenerate(), &v(&[0.0]), &v(&[1.0, 0.0]), 1e-2, 0.1, Method::ImplicitMidpoint).unwrap_err();
        assert!(matches!(err, Error::NewtonDivergence { step: 1, .. }), "{err:?}");
    }

    #[test]
    fn rejects_step_not_dividing_horizon() {
        assert!(integrate(&tq("0.5*y1^2"), &v(&[0.0]), &v(&[1.0]), 0.3, 1.0, Method::Rk4).is_err());
    }

    #[test]
    fn csv_layout() {
        let sys = tq("0.5*y1^2");
        let traj = integrate(&sys, &v(&[0.0]), &v(&[2.0]), 0.25, 1.0, Method::Rk4).unwrap();
        let csv = traj.to_csv(&sys).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,y1,p1,E_L,res_kin,res_mom");
        assert_eq!(lines.len(), 6);
        let last: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&last[..5], &[1.0, 2.0, 2.0, 2.0, 2.0]);
    }
}
