//! The almost Dirac structure `D_U` induced on the prolongation over `E*` by a
//! subbundle `U` of `E`.
//!
//! A pair `((z, u), (r, v))` at `(x, p)` lies in `D_U` when `z` is in `U(x)`,
//! `v = z` and `r + u + Cp z` annihilates `U(x)`, where `(Cp)_ab = C^g_ab p_g`.
//! Annihilators are identified with Euclidean orthogonal complements in the
//! coordinate basis.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebroid::{DualPoint, LieAlgebroid, Subbundle};
use crate::error::{Error, Result};
use crate::linalg;
use crate::prolong::{omega_sharp, ProlongCovector, ProlongVector};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiracPair {
    pub x: ProlongVector,
    pub alpha: ProlongCovector,
}

impl DiracPair {
    pub fn new(x: ProlongVector, alpha: ProlongCovector) -> Result<Self> {
        if x.base != alpha.base {
            return Err(Error::Dimension("vector and covector must share a base point".into()));
        }
        Ok(DiracPair { x, alpha })
    }

    /// `(z, u, r, v)` as one vector.
    pub fn stacked(&self) -> DVector<f64> {
        let (a, b) = (self.x.stacked(), self.alpha.stacked());
        DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
    }
}

#[derive(Debug, Clone)]
pub struct DiracBasis {
    pub base: DualPoint,
    pub generators: Vec<DiracPair>,
}

impl DiracBasis {
    /// Numerical rank of the generators stacked as rows of a `2n x 4n` matrix.
    pub fn rank(&self, tol: f64) -> usize {
        let rows: Vec<_> = self.generators.iter().map(|g| g.stacked().transpose()).collect();
        if rows.is_empty() {
            return 0;
        }
        linalg::numerical_rank(&DMatrix::from_rows(&rows), tol)
    }
}

/// Violations reported by the membership tests; each slot is an absolute residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    /// Distance of the relevant fiber vector from `U(x)`.
    pub outside_u: f64,
    /// `|v - z|` in the max norm.
    pub v_minus_z: f64,
    /// Length of the component of `r + u + Cp v` along `U(x)`.
    pub annihilator: f64,
    pub member: bool,
}

/// Basis of the lifted subbundle `{(z, u) : z in U(x)}`, as stacked `(z, u)`
/// columns: the spanning columns of `U` with `u = 0`, then the `n` momentum
/// directions.
pub fn lift_subbundle(alg: &LieAlgebroid, u: &Subbundle, pt: &DualPoint, tol: f64) -> Result<Vec<DVector<f64>>> {
    let n = alg.rank();
    let s = u.span_at(&pt.x)?;
    if !u.is_adapted() {
        let found = linalg::numerical_rank(&s, tol);
        if found != u.rank() {
            return Err(Error::RankDeficient { expected: u.rank(), found });
        }
    }
    let mut out = Vec::with_capacity(n + u.rank());
    for col in s.column_iter() {
        let mut w = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(&col);
        out.push(w);
    }
    for a in 0..n {
        let mut w = DVector::zeros(2 * n);
        w[n + a] = 1.0;
        out.push(w);
    }
    Ok(out)
}

fn scale(vs: &[&DVector<f64>]) -> f64 {
    1.0 + vs.iter().map(|v| v.amax()).fold(0.0, f64::max)
}

fn verdict(outside_u: f64, v_minus_z: f64, annihilator: f64, tol: f64, s: f64) -> Membership {
    let member = outside_u <= tol * s && v_minus_z <= tol * s && annihilator <= tol * s;
    Membership { outside_u, v_minus_z, annihilator, member }
}

/// Membership through the symplectic construction.
pub fn dirac_member_symplectic(alg: &LieAlgebroid, u: &Subbundle, pair: &DiracPair, tol: f64) -> Result<Membership> {
    let DiracPair { x, alpha } = pair;
    let cp = alg.structure_at(&x.base.x)?.contract(&x.base.p);
    let xi = &alpha.r + &x.u + &cp * &x.z;
    let outside = u.distance(&x.base.x, &x.z, tol)?;
    let gap = u.annihilator_gap(&x.base.x, &xi, tol)?;
    let s = scale(&[&x.z, &x.u, &alpha.r, &alpha.v, &xi]);
    Ok(verdict(outside, (&alpha.v - &x.z).amax(), gap, tol, s))
}

/// Membership through the dual construction: `alpha` must lie in the lifted
/// dual subbundle (`v` in `U`) and `X - sharp(alpha)` in its annihilator.
pub fn dirac_member_poisson(alg: &LieAlgebroid, u: &Subbundle, pair: &DiracPair, tol: f64) -> Result<Membership> {
    let DiracPair { x, alpha } = pair;
    let sharp = omega_sharp(alg, alpha)?;
    let dz = &x.z - &sharp.z;
    let du = &x.u - &sharp.u;
    let outside = u.distance(&x.base.x, &alpha.v, tol)?;
    let gap = u.annihilator_gap(&x.base.x, &du, tol)?;
    let s = scale(&[&x.z, &x.u, &alpha.r, &alpha.v, &du]);
    Ok(verdict(outside, dz.amax(), gap, tol, s))
}

/// `2n` generators of `D_U` at `pt`, built in an orthonormal frame adapted to
/// `U(x)` and mapped back to coordinates.
pub fn dirac_generators(alg: &LieAlgebroid, u: &Subbundle, pt: &DualPoint, tol: f64) -> Result<DiracBasis> {
    let n = alg.rank();
    let r = u.rank();
    let (q, c) = u.frame(&pt.x, tol)?;
    let mut f = DMatrix::zeros(n, n);
    f.columns_mut(0, r).copy_from(&q);
    f.columns_mut(r, n - r).copy_from(&c);
    let cp = f.transpose() * alg.structure_at(&pt.x)?.contract(&pt.p) * &f;

    let unit = |k: usize| DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
    let zero = || DVector::<f64>::zeros(n);
    let mut gens = Vec::with_capacity(2 * n);
    let mut push = |z: DVector<f64>, uu: DVector<f64>, rr: DVector<f64>, v: DVector<f64>| {
        gens.push(DiracPair {
            x: ProlongVector { base: pt.clone(), z: &f * z, u: &f * uu },
            alpha: ProlongCovector { base: pt.clone(), r: &f * rr, v: &f * v },
        });
    };
    for a in 0..r {
        let rr = DVector::from_fn(n, |b, _| if b < r { -cp[(b, a)] } else { 0.0 });
        push(unit(a), zero(), rr, unit(a));
    }
    for a in 0..n {
        let rr = if a < r { -unit(a) } else { zero() };
        push(zero(), unit(a), rr, zero());
    }
    for a in r..n {
        push(zero(), zero(), unit(a), zero());
    }
    Ok(DiracBasis { base: pt.clone(), generators: gens })
}

/// `alpha(X) = r.z + v.u`.
pub fn pairing(alpha: &ProlongCovector, x: &ProlongVector) -> f64 {
    alpha.pair(x)
}

/// `max |alpha_i(X_j) + alpha_j(X_i)|` over all generator pairs, including `i = j`.
pub fn check_self_orthogonal(basis: &DiracBasis) -> f64 {
    let g = &basis.generators;
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        for j in i..g.len() {
            let s = pairing(&g[i].alpha, &g[j].x) + pairing(&g[j].alpha, &g[i].x);
            worst = worst.max(s.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::prolong::omega_flat;

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    fn pair(pt: &DualPoint, z: &[f64], u: &[f64], r: &[f64], vv: &[f64]) -> DiracPair {
        DiracPair {
            x: ProlongVector { base: pt.clone(), z: v(z), u: v(u) },
            alpha: ProlongCovector { base: pt.clone(), r: v(r), v: v(vv) },
        }
    }

    #[test]
    fn lift_examples() {
        let so3 = LieAlgebroid::so3();
        let pt = DualPoint::new(&[], &[1.0, 2.0, 3.0]);
        let full = lift_subbundle(&so3, &Subbundle::full(&so3), &pt, DEFAULT_TOL).unwrap();
        assert_eq!(DMatrix::from_columns(&full), DMatrix::identity(6, 6));

        let plane = lift_subbundle(&so3, &Subbundle::adapted(&so3, 2).unwrap(), &pt, DEFAULT_TOL).unwrap();
        assert_eq!(plane.len(), 5);
        assert_eq!(plane[0], v(&[1., 0., 0., 0., 0., 0.]));
        assert_eq!(plane[1], v(&[0., 1., 0., 0., 0., 0.]));
        for (k, w) in plane[2..].iter().enumerate() {
            assert_eq!(w.rows(0, 3).amax(), 0.0);
            assert_eq!(w[3 + k], 1.0);
        }

        let zero = lift_subbundle(&so3, &Subbundle::adapted(&so3, 0).unwrap(), &pt, DEFAULT_TOL).unwrap();
        assert_eq!(zero.len(), 3);
    }

    #[test]
    fn lift_rejects_rank_drop() {
        let alg = LieAlgebroid::new(
            1,
            2,
            &[vec![parse("1").unwrap(), parse("0").unwrap()]],
            &[vec![parse("0").unwrap()], vec![parse("0").unwrap()]],
            &Default::default(),
        )
        .unwrap();
        let u = Subbundle::from_span(&alg, &[vec![parse("x1").unwrap()], vec![parse("0").unwrap()]]).unwrap();
        let err = lift_subbundle(&alg, &u, &DualPoint::new(&[0.0], &[0.0, 0.0]), DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { expected: 1, found: 0 }));
    }

    #[test]
    fn symplectic_membership_examples() {
        let so3 = LieAlgebroid::so3();
        let u = Subbundle::adapted(&so3, 2).unwrap();
        let pt = DualPoint::new(&[], &[1.0, 2.0, 3.0]);
        let p = pair(&pt, &[1., 0., 0.], &[0.; 3], &[0., 3., 0.], &[1., 0., 0.]);
        let m = dirac_member_symplectic(&so3, &u, &p, DEFAULT_TOL).unwrap();
        assert!(m.member, "{m:?}");
        assert!(dirac_member_poisson(&so3, &u, &p, DEFAULT_TOL).unwrap().member);

        let bad = pair(&pt, &[1., 0., 0.], &[0.; 3], &[0., 3., 0.], &[1., 0.1, 0.]);
        let m = dirac_member_symplectic(&so3, &u, &bad, DEFAULT_TOL).unwrap();
        assert!(!m.member);
        assert!(m.v_minus_z > 0.05 && m.outside_u == 0.0 && m.annihilator == 0.0);

        for uu in [[0.0, 0.0, 0.0], [5.0, -1.0, 2.0]] {
            let x = ProlongVector { base: pt.clone(), z: v(&[0.3, -0.2, 0.0]), u: v(&uu) };
            let alpha = omega_flat(&so3, &x).unwrap();
            let m = dirac_member_symplectic(&so3, &u, &DiracPair::new(x, alpha).unwrap(), DEFAULT_TOL).unwrap();
            assert!(m.member);
        }
    }

    #[test]
    fn poisson_membership_examples() {
        let so3 = LieAlgebroid::so3();
        let u = Subbundle::adapted(&so3, 2).unwrap();
        let pt = DualPoint::new(&[], &[1.0, 2.0, 3.0]);
        let off = pair(&pt, &[0., 0., 1.], &[0.; 3], &[0.; 3], &[0., 0., 1.]);
        assert!(!dirac_member_poisson(&so3, &u, &off, DEFAULT_TOL).unwrap().member);

        let alpha = ProlongCovector { base: pt.clone(), r: v(&[1.0, -4.0, 2.0]), v: v(&[0.5, 0.5, 0.0]) };
        let x = omega_sharp(&so3, &alpha).unwrap();
        assert!(dirac_member_poisson(&so3, &u, &DiracPair::new(x, alpha).unwrap(), DEFAULT_TOL).unwrap().member);
    }

    #[test]
    fn canonical_generators_are_graph_of_omega() {
        let tq = LieAlgebroid::tangent(2);
        let u = Subbundle::full(&tq);
        let pt = DualPoint::new(&[0.4, -1.0], &[2.0, 3.0]);
        let basis = dirac_generators(&tq, &u, &pt, DEFAULT_TOL).unwrap();
        assert_eq!(basis.generators.len(), 4);
        for g in &basis.generators {
            assert_eq!(omega_flat(&tq, &g.x).unwrap(), g.alpha);
        }
        assert_eq!(basis.rank(1e-9), 4);
        assert_eq!(check_self_orthogonal(&basis), 0.0);
    }

    #[test]
    fn suslov_generators() {
        let so3 = LieAlgebroid::so3();
        let u = Subbundle::adapted(&so3, 2).unwrap();
        let pt = DualPoint::new(&[], &[0.5, -1.5, 2.0]);
        let basis = dirac_generators(&so3, &u, &pt, DEFAULT_TOL).unwrap();
        assert_eq!(basis.rank(1e-9), 6);
        for g in &basis.generators {
            assert!(dirac_member_symplectic(&so3, &u, g, 1e-10).unwrap().member);
        }
        let p3 = basis.generators.iter().find(|g| g.x.u == v(&[0., 0., 1.]) && g.x.z.amax() == 0.0).unwrap();
        assert_eq!(p3.alpha.r.rows(0, 2).amax(), 0.0);
        assert!(check_self_orthogonal(&basis) <= 1e-10);
    }

    #[test]
    fn tilted_subbundle_generators() {
        let so3 = LieAlgebroid::so3();
        let cols = [["1", "0"], ["0.5", "1"], ["0", "2"]];
        let span: Vec<Vec<_>> = cols.iter().map(|row| row.iter().map(|s| parse(s).unwrap()).collect()).collect();
        let u = Subbundle::from_span(&so3, &span).unwrap();
        let pt = DualPoint::new(&[], &[0.7, 0.1, -1.3]);
        let basis = dirac_generators(&so3, &u, &pt, DEFAULT_TOL).unwrap();
        assert_eq!(basis.rank(1e-9), 6);
        assert!(check_self_orthogonal(&basis) <= 1e-12);
        for g in &basis.generators {
            assert!(dirac_member_symplectic(&so3, &u, g, 1e-10).unwrap().member);
            assert!(dirac_member_poisson(&so3, &u, g, 1e-10).unwrap().member);
        }
    }

    #[test]
    fn corrupted_generator_is_detected() {
        let so3 = LieAlgebroid::so3();
        let u = Subbundle::adapted(&so3, 2).unwrap();
        let mut basis = dirac_generators(&so3, &u, &DualPoint::new(&[], &[1.0, 2.0, 3.0]), DEFAULT_TOL).unwrap();
        basis.generators[0].alpha.r[0] += 1e-3;
        assert!(check_self_orthogonal(&basis) >= 1e-4);
    }

    #[test]
    fn members_are_self_annihilating() {
        let so3 = LieAlgebroid::so3();
        let u = Subbundle::adapted(&so3, 2).unwrap();
        let basis = dirac_generators(&so3, &u, &DualPoint::new(&[], &[1.0, 2.0, 3.0]), DEFAULT_TOL).unwrap();
        for g in &basis.generators {
            assert!(pairing(&g.alpha, &g.x).abs() < 1e-14);
        }
    }
}
