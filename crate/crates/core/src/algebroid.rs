//! Lie algebroids in local coordinates.
//!
//! An algebroid of rank `n` over an `m`-dimensional chart is described by its
//! anchor `rho^i_a(x)` and structure functions `C^g_ab(x)`, both given as
//! expressions in the base coordinates `x1..xm`.  Only the components with
//! `a < b` of the structure functions are stored; the others are obtained by
//! antisymmetry when the tensor is evaluated, so `C^g_ab = -C^g_ba` holds
//! exactly at every point.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, Scope};
use crate::linalg;

/// Default relative threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    pub x: DVector<f64>,
}

impl BasePoint {
    pub fn new(x: &[f64]) -> Self {
        BasePoint { x: DVector::from_column_slice(x) }
    }
}

/// A point `(x, y)` of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl FiberPoint {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        FiberPoint { x: DVector::from_column_slice(x), y: DVector::from_column_slice(y) }
    }
}

/// A point `(x, p)` of `E*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

impl DualPoint {
    pub fn new(x: &[f64], p: &[f64]) -> Self {
        DualPoint { x: DVector::from_column_slice(x), p: DVector::from_column_slice(p) }
    }
}

pub(crate) fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Index of the pair `(a, b)`, `a < b`, in the packed upper triangle.
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Structure functions evaluated at a point: `get(g, a, b) = C^g_ab`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensor {
    n: usize,
    c: Vec<f64>,
}

impl StructureTensor {
    fn from_packed(n: usize, packed: &[f64]) -> Self {
        let mut c = vec![0.0; n * n * n];
        for g in 0..n {
            for a in 0..n {
                for b in (a + 1)..n {
                    let v = packed[g * n * (n - 1) / 2 + pair_index(n, a, b)];
                    c[(g * n + a) * n + b] = v;
                    c[(g * n + b) * n + a] = -v;
                }
            }
        }
        StructureTensor { n, c }
    }

    pub fn zeros(n: usize) -> Self {
        StructureTensor { n, c: vec![0.0; n * n * n] }
    }

    #[inline]
    pub fn get(&self, g: usize, a: usize, b: usize) -> f64 {
        self.c[(g * self.n + a) * self.n + b]
    }

    /// `(Cp)_ab = C^g_ab p_g`; exactly antisymmetric.
    pub fn contract(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                let v: f64 = (0..n).map(|g| self.get(g, a, b) * p[g]).sum();
                out[(a, b)] = v;
                out[(b, a)] = -v;
            }
        }
        out
    }
}

/// Anchor and structure functions evaluated at one base point.
#[derive(Debug, Clone)]
pub struct LocalStructure {
    /// `m x n`, entry `(i, a) = rho^i_a`.
    pub rho: DMatrix<f64>,
    pub c: StructureTensor,
}

/// Values together with first base derivatives.
#[derive(Debug, Clone)]
pub struct StructureJet {
    pub local: LocalStructure,
    /// `d_rho[j][(i, a)] = d rho^i_a / d x^j`.
    pub d_rho: Vec<DMatrix<f64>>,
    /// `d_c[j]` holds `d C / d x^j`.
    pub d_c: Vec<StructureTensor>,
}

#[derive(Debug, Clone)]
pub struct LieAlgebroid {
    m: usize,
    n: usize,
    params: BTreeMap<String, f64>,
    anchor: Vec<Compiled>,
    structure: Vec<Compiled>,
}

impl LieAlgebroid {
    /// `anchor` is `m` rows of `n` expressions; `structure[g]` lists
    /// `C^g_ab` for the pairs `a < b` in lexicographic order.
    pub fn new(
        m: usize,
        n: usize,
        anchor: &[Vec<Expr>],
        structure: &[Vec<Expr>],
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        if anchor.len() != m || anchor.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("anchor must be {m} x {n}")));
        }
        let pairs = n * n.saturating_sub(1) / 2;
        if structure.len() != n || structure.iter().any(|row| row.len() != pairs) {
            return Err(Error::Dimension(format!("structure must be {n} x {pairs}")));
        }
        let scope = Scope::new(&names("x", m)).with_constants(params);
        let compile = |e: &Expr| e.compile(&scope).map_err(Error::eval_at(&[]));
        Ok(LieAlgebroid {
            m,
            n,
            params: params.clone(),
            anchor: anchor.iter().flatten().map(compile).collect::<Result<_>>()?,
            structure: structure.iter().flatten().map(compile).collect::<Result<_>>()?,
        })
    }

    /// The tangent bundle of `R^d`: identity anchor, vanishing brackets.
    pub fn tangent(d: usize) -> Self {
        let anchor: Vec<Vec<Expr>> =
            (0..d).map(|i| (0..d).map(|a| Expr::Const(if i == a { 1.0 } else { 0.0 })).collect()).collect();
        let structure = vec![vec![Expr::Const(0.0); d * d.saturating_sub(1) / 2]; d];
        Self::new(d, d, &anchor, &structure, &BTreeMap::new()).expect("well-formed")
    }

    /// `so(3)` as an algebroid over a point: `[e1, e2] = e3` and cyclic.
    pub fn so3() -> Self {
        let c = |v: f64| Expr::Const(v);
        // pairs (1,2), (1,3), (2,3)
        let structure = vec![
            vec![c(0.0), c(0.0), c(1.0)],
            vec![c(0.0), c(-1.0), c(0.0)],
            vec![c(1.0), c(0.0), c(0.0)],
        ];
        Self::new(0, 3, &[], &structure, &BTreeMap::new()).expect("well-formed")
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Scope over the base coordinates `x1..xm`.
    pub fn base_scope(&self) -> Scope {
        Scope::new(&names("x", self.m)).with_constants(&self.params)
    }

    /// Scope over `x1..xm, y1..yn`.
    pub fn fiber_scope(&self) -> Scope {
        let mut v = names("x", self.m);
        v.extend(names("y", self.n));
        Scope::new(&v).with_constants(&self.params)
    }

    /// Scope over `x1..xm, p1..pn`.
    pub fn dual_scope(&self) -> Scope {
        let mut v = names("x", self.m);
        v.extend(names("p", self.n));
        Scope::new(&v).with_constants(&self.params)
    }

    fn check_base(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Dimension(format!("base point has {} coordinates, expected {}", x.len(), self.m)));
        }
        Ok(())
    }

    pub fn local(&self, x: &DVector<f64>) -> Result<LocalStructure> {
        self.check_base(x)?;
        let xs = x.as_slice();
        let mut rho = DMatrix::zeros(self.m, self.n);
        for i in 0..self.m {
            for a in 0..self.n {
                rho[(i, a)] = self.anchor[i * self.n + a].eval(xs).map_err(Error::eval_at(xs))?;
            }
        }
        let packed = self.structure.iter().map(|e| e.eval(xs)).collect::<std::result::Result<Vec<_>, _>>();
        let packed = packed.map_err(Error::eval_at(xs))?;
        Ok(LocalStructure { rho, c: StructureTensor::from_packed(self.n, &packed) })
    }

    pub fn anchor_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.local(x)?.rho)
    }

    pub fn structure_at(&self, x: &DVector<f64>) -> Result<StructureTensor> {
        Ok(self.local(x)?.c)
    }

    pub fn jet(&self, x: &DVector<f64>) -> Result<StructureJet> {
        self.check_base(x)?;
        let (m, n) = (self.m, self.n);
        let xs = x.as_slice();
        let wrt: Vec<usize> = (0..m).collect();
        let mut rho = DMatrix::zeros(m, n);
        let mut d_rho = vec![DMatrix::zeros(m, n); m];
        for i in 0..m {
            for a in 0..n {
                let (v, g) = self.anchor[i * n + a].grad(xs, &wrt).map_err(Error::eval_at(xs))?;
                rho[(i, a)] = v;
                for j in 0..m {
                    d_rho[j][(i, a)] = g[j];
                }
            }
        }
        let mut packed = Vec::with_capacity(self.structure.len());
        let mut d_packed = vec![Vec::with_capacity(self.structure.len()); m];
        for e in &self.structure {
            let (v, g) = e.grad(xs, &wrt).map_err(Error::eval_at(xs))?;
            packed.push(v);
            for j in 0..m {
                d_packed[j].push(g[j]);
            }
        }
        Ok(StructureJet {
            local: LocalStructure { rho, c: StructureTensor::from_packed(n, &packed) },
            d_rho,
            d_c: d_packed.iter().map(|d| StructureTensor::from_packed(n, d)).collect(),
        })
    }

    /// Residuals of the two structure equations at `x`.
    pub fn structure_residuals(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        let (m, n) = (self.m, self.n);
        let jet = self.jet(x)?;
        let rho = &jet.local.rho;
        let c = &jet.local.c;
        let mut eq1: f64 = 0.0;
        for i in 0..m {
            for a in 0..n {
                for b in 0..n {
                    let mut lhs = 0.0;
                    for j in 0..m {
                        lhs += rho[(j, a)] * jet.d_rho[j][(i, b)] - rho[(j, b)] * jet.d_rho[j][(i, a)];
                    }
                    let rhs: f64 = (0..n).map(|g| rho[(i, g)] * c.get(g, a, b)).sum();
                    eq1 = eq1.max((lhs - rhs).abs());
                }
            }
        }
        let mut eq2: f64 = 0.0;
        let term = |d: usize, a: usize, b: usize, g: usize| -> f64 {
            let deriv: f64 = (0..m).map(|i| rho[(i, a)] * jet.d_c[i].get(d, b, g)).sum();
            let quad: f64 = (0..n).map(|nu| c.get(d, a, nu) * c.get(nu, b, g)).sum();
            deriv + quad
        };
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    for g in 0..n {
                        let cyc = term(d, a, b, g) + term(d, b, g, a) + term(d, g, a, b);
                        eq2 = eq2.max(cyc.abs());
                    }
                }
            }
        }
        Ok((eq1, eq2))
    }

    pub fn validate_structure(&self, points: &[BasePoint], tol: f64) -> Result<StructureReport> {
        if points.is_empty() {
            return Err(Error::Dimension("validate_structure needs at least one point".into()));
        }
        let mut report = StructureReport { max_residual_eq1: 0.0, max_residual_eq2: 0.0, pass: false };
        for pt in points {
            let (r1, r2) = self.structure_residuals(&pt.x)?;
            report.max_residual_eq1 = report.max_residual_eq1.max(r1);
            report.max_residual_eq2 = report.max_residual_eq2.max(r2);
        }
        report.pass = report.max_residual_eq1 <= tol && report.max_residual_eq2 <= tol;
        Ok(report)
    }

    /// A scalar function of the base coordinates.
    pub fn base_field(&self, e: &Expr) -> Result<ScalarField> {
        ScalarField::new(e, &self.base_scope())
    }

    /// A function on `E*`, in `x1..xm, p1..pn`.
    pub fn dual_field(&self, e: &Expr) -> Result<ScalarField> {
        ScalarField::new(e, &self.dual_scope())
    }

    /// Coefficients of `d^E f` in the dual basis: `df/dx^i rho^i_a`.
    pub fn d_function(&self, f: &ScalarField, x: &BasePoint) -> Result<DVector<f64>> {
        let rho = self.anchor_at(&x.x)?;
        let (_, g) = f.grad(x.x.as_slice(), &(0..self.m).collect::<Vec<_>>())?;
        Ok(rho.transpose() * DVector::from_vec(g))
    }

    /// `d^E f` together with its base derivatives, for feeding into
    /// [`Self::d_one_section_from_jet`].
    pub fn d_function_jet(&self, f: &ScalarField, x: &BasePoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (m, n) = (self.m, self.n);
        let jet = self.jet(&x.x)?;
        let fj = f.jet(x.x.as_slice(), &(0..m).collect::<Vec<_>>())?;
        let rho = &jet.local.rho;
        let theta = DVector::from_iterator(n, (0..n).map(|a| (0..m).map(|i| fj.gradient[i] * rho[(i, a)]).sum()));
        let mut dtheta = DMatrix::zeros(n, m);
        for a in 0..n {
            for j in 0..m {
                dtheta[(a, j)] = (0..m)
                    .map(|i| fj.hess(i, j) * rho[(i, a)] + fj.gradient[i] * jet.d_rho[j][(i, a)])
                    .sum();
            }
        }
        Ok((theta, dtheta))
    }

    /// `d^E theta` as the antisymmetric matrix `M_bg = (d^E theta)(e_b, e_g)`.
    ///
    /// With `K_bg = d theta_g/dx^i rho^i_b - 1/2 theta_a C^a_bg`, the entry is
    /// `K_bg - K_gb`, i.e. the coefficient form paired with
    /// `<e^b ^ e^g, (e_u, e_v)> = delta^b_u delta^g_v - delta^b_v delta^g_u`.
    pub fn d_one_section(&self, theta: &[ScalarField], x: &BasePoint) -> Result<DMatrix<f64>> {
        if theta.len() != self.n {
            return Err(Error::Dimension(format!("1-section needs {} components", self.n)));
        }
        let wrt: Vec<usize> = (0..self.m).collect();
        let mut vals = DVector::zeros(self.n);
        let mut dtheta = DMatrix::zeros(self.n, self.m);
        for (a, t) in theta.iter().enumerate() {
            let (v, g) = t.grad(x.x.as_slice(), &wrt)?;
            vals[a] = v;
            for j in 0..self.m {
                dtheta[(a, j)] = g[j];
            }
        }
        self.d_one_section_from_jet(&vals, &dtheta, x)
    }

    /// Same as [`Self::d_one_section`] from the values `theta` and the base
    /// Jacobian `dtheta[(g, i)] = d theta_g / d x^i`.
    pub fn d_one_section_from_jet(
        &self,
        theta: &DVector<f64>,
        dtheta: &DMatrix<f64>,
        x: &BasePoint,
    ) -> Result<DMatrix<f64>> {
        let n = self.n;
        let local = self.local(&x.x)?;
        let k = |b: usize, g: usize| -> f64 {
            let deriv: f64 = (0..self.m).map(|i| dtheta[(g, i)] * local.rho[(i, b)]).sum();
            let brk: f64 = (0..n).map(|a| theta[a] * local.c.get(a, b, g)).sum();
            deriv - 0.5 * brk
        };
        let mut out = DMatrix::zeros(n, n);
        for b in 0..n {
            for g in (b + 1)..n {
                let v = k(b, g) - k(g, b);
                out[(b, g)] = v;
                out[(g, b)] = -v;
            }
        }
        Ok(out)
    }

    /// Linear Poisson bracket on `E*`:
    /// `{F,G} = rho^i_a (F_x^i G_p_a - G_x^i F_p_a) - C^g_ab p_g F_p_a G_p_b`.
    pub fn poisson_bracket(&self, f: &ScalarField, g: &ScalarField, pt: &DualPoint) -> Result<f64> {
        let (m, n) = (self.m, self.n);
        let local = self.local(&pt.x)?;
        let vals: Vec<f64> = pt.x.iter().chain(pt.p.iter()).copied().collect();
        let wrt: Vec<usize> = (0..m + n).collect();
        let (_, df) = f.grad(&vals, &wrt)?;
        let (_, dg) = g.grad(&vals, &wrt)?;
        let mut out = 0.0;
        for i in 0..m {
            for a in 0..n {
                out += local.rho[(i, a)] * (df[i] * dg[m + a] - dg[i] * df[m + a]);
            }
        }
        let cp = local.c.contract(&pt.p);
        for a in 0..n {
            for b in 0..n {
                out -= cp[(a, b)] * df[m + a] * dg[m + b];
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StructureReport {
    pub max_residual_eq1: f64,
    pub max_residual_eq2: f64,
    pub pass: bool,
}

/// A compiled scalar expression together with the slot layout it was
/// compiled against.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expr,
    compiled: Compiled,
}

impl ScalarField {
    pub fn new(e: &Expr, scope: &Scope) -> Result<Self> {
        Ok(ScalarField { expr: e.clone(), compiled: e.compile(scope).map_err(Error::eval_at(&[]))? })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, vals: &[f64]) -> Result<f64> {
        self.compiled.eval(vals).map_err(Error::eval_at(vals))
    }

    pub fn grad(&self, vals: &[f64], wrt: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.compiled.grad(vals, wrt).map_err(Error::eval_at(vals))
    }

    pub fn jet(&self, vals: &[f64], wrt: &[usize]) -> Result<crate::expr::Jet2> {
        self.compiled.jet2(vals, wrt).map_err(Error::eval_at(vals))
    }

    pub fn depends_on_any(&self, slots: std::ops::Range<usize>) -> bool {
        self.compiled.used_slots().iter().any(|s| slots.contains(s))
    }
}

/// A constant-rank subbundle `U` of `E`, presented by `r` spanning columns.
#[derive(Debug, Clone)]
pub struct Subbundle {
    m: usize,
    n: usize,
    r: usize,
    adapted: bool,
    /// Row-major `n x r`; empty when adapted.
    span: Vec<ScalarField>,
}

impl Subbundle {
    /// `U = span(e_1, ..., e_r)`.
    pub fn adapted(alg: &LieAlgebroid, r: usize) -> Result<Self> {
        if r > alg.n {
            return Err(Error::Dimension(format!("subbundle rank {r} exceeds fiber rank {}", alg.n)));
        }
        Ok(Subbundle { m: alg.m, n: alg.n, r, adapted: true, span: Vec::new() })
    }

    pub fn full(alg: &LieAlgebroid) -> Self {
        Self::adapted(alg, alg.n).expect("rank n")
    }

    /// `span[a][c]` is component `a` of column `c`, an expression in `x`.
    pub fn from_span(alg: &LieAlgebroid, span: &[Vec<Expr>]) -> Result<Self> {
        let n = alg.n;
        let r = span.first().map_or(0, Vec::len);
        if span.len() != n || span.iter().any(|row| row.len() != r) || r > n {
            return Err(Error::Dimension(format!("span must be {n} x r with r <= {n}")));
        }
        let scope = alg.base_scope();
        let span = span.iter().flatten().map(|e| ScalarField::new(e, &scope)).collect::<Result<_>>()?;
        Ok(Subbundle { m: alg.m, n, r, adapted: false, span })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn fiber_rank(&self) -> usize {
        self.n
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    /// True when the spanning columns do not depend on the base point.
    pub fn is_constant(&self) -> bool {
        self.adapted || self.span.iter().all(|s| !s.depends_on_any(0..self.m))
    }

    /// Spanning columns at `x` as an `n x r` matrix.
    pub fn span_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if self.adapted {
            return Ok(DMatrix::identity(self.n, self.r));
        }
        let xs = x.as_slice();
        let mut s = DMatrix::zeros(self.n, self.r);
        for a in 0..self.n {
            for c in 0..self.r {
                s[(a, c)] = self.span[a * self.r + c].eval(xs)?;
            }
        }
        Ok(s)
    }

    /// Spanning columns and their base derivatives `d_span[j] = dS/dx^j`.
    pub fn span_jet(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        if self.adapted {
            return Ok((DMatrix::identity(self.n, self.r), vec![DMatrix::zeros(self.n, self.r); self.m]));
        }
        let xs = x.as_slice();
        let wrt: Vec<usize> = (0..self.m).collect();
        let mut s = DMatrix::zeros(self.n, self.r);
        let mut ds = vec![DMatrix::zeros(self.n, self.r); self.m];
        for a in 0..self.n {
            for c in 0..self.r {
                let (v, g) = self.span[a * self.r + c].grad(xs, &wrt)?;
                s[(a, c)] = v;
                for j in 0..self.m {
                    ds[j][(a, c)] = g[j];
                }
            }
        }
        Ok((s, ds))
    }

    /// Orthonormal bases of `U(x)` and of its Euclidean complement, the
    /// latter read as covectors spanning the annihilator.
    pub fn frame(&self, x: &DVector<f64>, tol: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.adapted {
            let id = DMatrix::<f64>::identity(self.n, self.n);
            return Ok((id.columns(0, self.r).into_owned(), id.columns(self.r, self.n - self.r).into_owned()));
        }
        let s = self.span_at(x)?;
        let found = linalg::numerical_rank(&s, tol);
        if found != self.r {
            return Err(Error::RankDeficient { expected: self.r, found });
        }
        let q = linalg::orthonormal_columns(&s);
        let c = linalg::orthogonal_complement(&q);
        Ok((q, c))
    }

    /// Orthonormal covectors spanning the annihilator of `U(x)`.
    pub fn annihilator(&self, x: &BasePoint, tol: f64) -> Result<Vec<DVector<f64>>> {
        let (_, c) = self.frame(&x.x, tol)?;
        Ok(c.column_iter().map(|col| col.into_owned()).collect())
    }

    /// Euclidean distance from `v` to `U(x)`.
    pub fn distance(&self, x: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<f64> {
        let (q, _) = self.frame(x, tol)?;
        Ok((v - &q * (q.transpose() * v)).norm())
    }

    pub fn member_u(&self, x: &BasePoint, v: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.distance(&x.x, v, tol)? <= tol * (1.0 + v.norm()))
    }

    /// Euclidean length of the restriction of `xi` to `U(x)`; independent of
    /// the spanning columns chosen for `U`.
    pub fn annihilator_gap(&self, x: &DVector<f64>, xi: &DVector<f64>, tol: f64) -> Result<f64> {
        let (q, _) = self.frame(x, tol)?;
        Ok((q.transpose() * xi).norm())
    }

    pub fn member_uann(&self, x: &BasePoint, xi: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.annihilator_gap(&x.x, xi, tol)? <= tol * (1.0 + xi.norm()))
    }
}
