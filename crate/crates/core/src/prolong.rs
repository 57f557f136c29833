//! The prolongations of an algebroid over `E` and over `E*`, in the canonical
//! coordinate bases.
//!
//! Vectors of the prolongation over `E*` are written `(x, p; z, u)` in the
//! basis `{Y_a, P^a}` and covectors `(x, p; r, v)` in its dual basis.  On the
//! prolongation over `E` vectors are `(x, y; s, w)` in `{X_a, V_a}` and
//! covectors `(x, y; sbar, wbar)`.  Every map here is a closed-form
//! expression in these coordinates.

use nalgebra::{DMatrix, DVector};

use crate::algebroid::{DualPoint, FiberPoint, LieAlgebroid, ScalarField};
use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct ProlongVector {
    pub base: DualPoint,
    pub z: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProlongCovector {
    pub base: DualPoint,
    pub r: DVector<f64>,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TEEVector {
    pub base: FiberPoint,
    pub s: DVector<f64>,
    pub w: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TEECovector {
    pub base: FiberPoint,
    pub sbar: DVector<f64>,
    pub wbar: DVector<f64>,
}

impl ProlongVector {
    /// Coordinates stacked as `(z, u)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.z.len();
        DVector::from_iterator(2 * n, self.z.iter().chain(self.u.iter()).copied())
    }

    /// The underlying pair `(e', v)` with `e' = z` in `E` and the tangent
    /// vector `v = (xdot, pdot)` to `E*`.
    pub fn ambient(&self, alg: &LieAlgebroid) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let rho = alg.anchor_at(&self.base.x)?;
        Ok((self.z.clone(), &rho * &self.z, self.u.clone()))
    }
}

impl ProlongCovector {
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.r.len();
        DVector::from_iterator(2 * n, self.r.iter().chain(self.v.iter()).copied())
    }

    /// Natural pairing with a vector at the same base point.
    pub fn pair(&self, x: &ProlongVector) -> f64 {
        self.r.dot(&x.z) + self.v.dot(&x.u)
    }
}

fn cp(alg: &LieAlgebroid, pt: &DualPoint) -> Result<DMatrix<f64>> {
    Ok(alg.structure_at(&pt.x)?.contract(&pt.p))
}

/// `(z, u) -> (r, v) = (-u - Cp z, z)`.
pub fn omega_flat(alg: &LieAlgebroid, x: &ProlongVector) -> Result<ProlongCovector> {
    let cpz = cp(alg, &x.base)? * &x.z;
    Ok(ProlongCovector { base: x.base.clone(), r: -&x.u - cpz, v: x.z.clone() })
}

/// Inverse of [`omega_flat`]: `(r, v) -> (z, u) = (v, -r - Cp v)`.
pub fn omega_sharp(alg: &LieAlgebroid, a: &ProlongCovector) -> Result<ProlongVector> {
    let cpv = cp(alg, &a.base)? * &a.v;
    Ok(ProlongVector { base: a.base.clone(), z: a.v.clone(), u: -&a.r - cpv })
}

/// Matrix `M` of the canonical symplectic section in `{Y_a, P^a}`, so that
/// `Omega(X, X') = X^T M X'` with `M = [[Cp, I], [-I, 0]]`.
pub fn symplectic_matrix(alg: &LieAlgebroid, pt: &DualPoint) -> Result<DMatrix<f64>> {
    let n = alg.rank();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&cp(alg, pt)?);
    for a in 0..n {
        m[(a, n + a)] = 1.0;
        m[(n + a, a)] = -1.0;
    }
    Ok(m)
}

/// Liouville section `p_a Y^a`.
pub fn liouville(pt: &DualPoint) -> ProlongCovector {
    ProlongCovector { base: pt.clone(), r: pt.p.clone(), v: DVector::zeros(pt.p.len()) }
}

/// Euler section at the base of `x`, and the vertical endomorphism applied to `x`.
pub fn euler_and_s(x: &TEEVector) -> (TEEVector, TEEVector) {
    let n = x.s.len();
    let delta = TEEVector { base: x.base.clone(), s: DVector::zeros(n), w: x.base.y.clone() };
    let sx = TEEVector { base: x.base.clone(), s: DVector::zeros(n), w: x.s.clone() };
    (delta, sx)
}

/// `S(xi) = Delta` (the second-order condition), to `tol`.
pub fn is_sode(xi: &TEEVector, tol: f64) -> bool {
    let (delta, sx) = euler_and_s(xi);
    (sx.w - delta.w).amax() <= tol && sx.s == delta.s
}

/// `(x, p; z, u) -> (x, z; u + Cp z, p)`.
pub fn a_e_map(alg: &LieAlgebroid, x: &ProlongVector) -> Result<TEECovector> {
    let cpz = cp(alg, &x.base)? * &x.z;
    Ok(TEECovector {
        base: FiberPoint { x: x.base.x.clone(), y: x.z.clone() },
        sbar: &x.u + cpz,
        wbar: x.base.p.clone(),
    })
}

pub fn a_e_inverse(alg: &LieAlgebroid, w: &TEECovector) -> Result<ProlongVector> {
    let base = DualPoint { x: w.base.x.clone(), p: w.wbar.clone() };
    let cpy = cp(alg, &base)? * &w.base.y;
    Ok(ProlongVector { base, z: w.base.y.clone(), u: &w.sbar - cpy })
}

/// `(x, y; s, w) -> (x, w; -s, y)`.
pub fn gamma_e_map(w: &TEECovector) -> ProlongCovector {
    ProlongCovector {
        base: DualPoint { x: w.base.x.clone(), p: w.wbar.clone() },
        r: -&w.sbar,
        v: w.base.y.clone(),
    }
}

/// A Lagrangian `L(x, y)` on `E`.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    m: usize,
    n: usize,
    field: ScalarField,
}

/// Value and derivatives of `L` at one point.
#[derive(Debug, Clone)]
pub struct LagrangianJet {
    pub value: f64,
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub dyy: DMatrix<f64>,
    /// `dyx[(a, i)] = d^2 L / dy^a dx^i`.
    pub dyx: DMatrix<f64>,
}

impl Lagrangian {
    pub fn new(alg: &LieAlgebroid, e: &Expr) -> Result<Self> {
        Ok(Lagrangian { m: alg.base_dim(), n: alg.rank(), field: ScalarField::new(e, &alg.fiber_scope())? })
    }

    pub fn expr(&self) -> &Expr {
        self.field.expr()
    }

    fn slots(&self, e: &FiberPoint) -> Result<Vec<f64>> {
        if e.x.len() != self.m || e.y.len() != self.n {
            return Err(Error::Dimension(format!("fiber point must have {} + {} coordinates", self.m, self.n)));
        }
        Ok(e.x.iter().chain(e.y.iter()).copied().collect())
    }

    pub fn value(&self, e: &FiberPoint) -> Result<f64> {
        self.field.eval(&self.slots(e)?)
    }

    pub fn jet(&self, e: &FiberPoint) -> Result<LagrangianJet> {
        let (m, n) = (self.m, self.n);
        let vals = self.slots(e)?;
        let j = self.field.jet(&vals, &(0..m + n).collect::<Vec<_>>())?;
        Ok(LagrangianJet {
            value: j.value,
            dx: DVector::from_iterator(m, j.gradient[..m].iter().copied()),
            dy: DVector::from_iterator(n, j.gradient[m..].iter().copied()),
            dyy: DMatrix::from_fn(n, n, |a, b| j.hess(m + a, m + b)),
            dyx: DMatrix::from_fn(n, m, |a, i| j.hess(m + a, i)),
        })
    }

    /// First derivatives only: `(L, dL/dx, dL/dy)`.
    pub fn gradient(&self, e: &FiberPoint) -> Result<(f64, DVector<f64>, DVector<f64>)> {
        let (m, n) = (self.m, self.n);
        let vals = self.slots(e)?;
        let (v, g) = self.field.grad(&vals, &(0..m + n).collect::<Vec<_>>())?;
        Ok((v, DVector::from_column_slice(&g[..m]), DVector::from_column_slice(&g[m..])))
    }
}

/// `(x, y) -> (x, dL/dy)`.
pub fn legendre(lg: &Lagrangian, e: &FiberPoint) -> Result<DualPoint> {
    let (_, _, dy) = lg.gradient(e)?;
    Ok(DualPoint { x: e.x.clone(), p: dy })
}

/// Coefficients of the prolongation differential of `L`:
/// `(x, y; rho^T dL/dx, dL/dy)`.
pub fn d_tee_l(alg: &LieAlgebroid, lg: &Lagrangian, e: &FiberPoint) -> Result<TEECovector> {
    let (_, dx, dy) = lg.gradient(e)?;
    let rho = alg.anchor_at(&e.x)?;
    Ok(TEECovector { base: e.clone(), sbar: rho.transpose() * dx, wbar: dy })
}

/// Dirac differential `(x, dL/dy; -rho^T dL/dx, y)`.
pub fn dirac_differential(alg: &LieAlgebroid, lg: &Lagrangian, e: &FiberPoint) -> Result<ProlongCovector> {
    Ok(gamma_e_map(&d_tee_l(alg, lg, e)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    /// `y . dL/dy - L`.
    pub epsilon_l: f64,
    /// `p . y - L`.
    pub e_l: f64,
}

/// Energy function and generalized energy; `p` defaults to the Legendre
/// transform of `e`.
pub fn energies(lg: &Lagrangian, e: &FiberPoint, p: Option<&DVector<f64>>) -> Result<Energies> {
    let (l, _, dy) = lg.gradient(e)?;
    let epsilon_l = e.y.dot(&dy) - l;
    let e_l = match p {
        Some(p) => p.dot(&e.y) - l,
        None => epsilon_l,
    };
    Ok(Energies { epsilon_l, e_l })
}
