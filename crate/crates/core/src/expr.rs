//! Arithmetic expressions over named variables.
//!
//! Every piece of model data (anchor, structure functions, Lagrangians,
//! constraint spans, Hamilton-Jacobi sections) is written as a small
//! expression string.  Expressions are parsed into an [`Expr`] tree, bound to
//! a [`Scope`] (which turns names into slot indices or fixed parameter
//! values) and evaluated either as plain values or as second-order forward
//! jets, which give exact gradients and Hessians.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' INT)?
//! atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x^2` is `(-x)^2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Neg,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Neg => "neg",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "neg" => Func::Neg,
            _ => return None,
        })
    }

    /// Value, first and second derivative at `v`.
    fn taylor(self, v: f64) -> (f64, f64, f64) {
        match self {
            Func::Sin => {
                let (s, c) = v.sin_cos();
                (s, c, -s)
            }
            Func::Cos => {
                let (s, c) = v.sin_cos();
                (c, -s, -c)
            }
            Func::Exp => {
                let e = v.exp();
                (e, e, e)
            }
            Func::Ln => (v.ln(), 1.0 / v, -1.0 / (v * v)),
            Func::Sqrt => {
                let s = v.sqrt();
                (s, 0.5 / s, -0.25 / (s * v))
            }
            Func::Neg => (-v, -1.0, 0.0),
        }
    }

    fn value(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Neg => -v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn name(self) -> &'static str {
        match self {
            BinOp::Add => "addition",
            BinOp::Sub => "subtraction",
            BinOp::Mul => "multiplication",
            BinOp::Div => "division",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Unary(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Non-negative integer power.
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("non-finite result in {op}")]
    NonFinite { op: &'static str },
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.syntax("expected non-negative integer exponent"));
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let n: u32 = digits.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                let inner = self.atom()?;
                Ok(Expr::Unary(Func::Neg, Box::new(inner)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { offset: start, name })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.syntax("expected `)`"));
                    }
                    self.pos += 1;
                    Ok(Expr::Unary(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        if let Some(b'e' | b'E') = self.src.get(self.pos) {
            let save = self.pos;
            self.pos += 1;
            if let Some(b'+' | b'-') = self.src.get(self.pos) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` followed by something else: not an exponent
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "malformed number".into(),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax { offset: start, message: "number out of range".into() });
        }
        Ok(Expr::Const(value))
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; reparsing yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "-({:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(Func::Neg, a) => write!(f, "-({a})"),
            Expr::Unary(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
        }
    }
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        Expr::Unary(func, Box::new(arg))
    }

    pub fn powi(self, n: u32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    /// Names of all variables occurring in the tree.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replace every occurrence of variable `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(f, a) => Expr::Unary(*f, Box::new(a.substitute(name, with))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(name, with)), *n),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(name, with)), Box::new(b.substitute(name, with)))
            }
        }
    }

    pub fn compile(&self, scope: &Scope) -> Result<Compiled, EvalError> {
        Ok(Compiled { root: Node::build(self, scope)? })
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(rhs))
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Unary(Func::Neg, Box::new(self))
    }
}

/// Variable bindings for name-based evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding(BTreeMap<String, f64>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Binding {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Binding(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Maps variable names to evaluation slots; names listed in `constants`
/// are folded in as fixed values (model parameters).
#[derive(Debug, Clone, Default)]
pub struct Scope {
    slots: Vec<String>,
    constants: BTreeMap<String, f64>,
}

impl Scope {
    pub fn new<S: AsRef<str>>(slots: &[S]) -> Self {
        Scope { slots: slots.iter().map(|s| s.as_ref().to_string()).collect(), constants: BTreeMap::new() }
    }

    pub fn with_constants(mut self, constants: &BTreeMap<String, f64>) -> Self {
        self.constants.extend(constants.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Slot(usize),
    Unary(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
}

impl Node {
    fn build(e: &Expr, scope: &Scope) -> Result<Node, EvalError> {
        Ok(match e {
            Expr::Const(c) => Node::Const(*c),
            Expr::Var(name) => match scope.slot(name) {
                Some(i) => Node::Slot(i),
                None => match scope.constants.get(name) {
                    Some(c) => Node::Const(*c),
                    None => return Err(EvalError::Unbound(name.clone())),
                },
            },
            Expr::Unary(f, a) => Node::Unary(*f, Box::new(Node::build(a, scope)?)),
            Expr::Binary(op, a, b) => {
                Node::Binary(*op, Box::new(Node::build(a, scope)?), Box::new(Node::build(b, scope)?))
            }
            Expr::Pow(a, n) => Node::Pow(Box::new(Node::build(a, scope)?), *n),
        })
    }

    fn eval(&self, vals: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Node::Const(c) => return Ok(*c),
            Node::Slot(i) => return Ok(vals[*i]),
            Node::Unary(f, a) => {
                let v = f.value(a.eval(vals)?);
                finite(v, f.name())?
            }
            Node::Binary(op, a, b) => {
                let v = op.apply(a.eval(vals)?, b.eval(vals)?);
                finite(v, op.name())?
            }
            Node::Pow(a, n) => finite(a.eval(vals)?.powi(*n as i32), "power")?,
        };
        Ok(v)
    }

    fn collect_slots(&self, out: &mut BTreeSet<usize>) {
        match self {
            Node::Const(_) => {}
            Node::Slot(i) => {
                out.insert(*i);
            }
            Node::Unary(_, a) | Node::Pow(a, _) => a.collect_slots(out),
            Node::Binary(_, a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }

    fn jet(&self, vals: &[f64], seed: &[Option<usize>], k: usize) -> Result<Jet, EvalError> {
        match self {
            Node::Const(c) => Ok(Jet::constant(*c, k)),
            Node::Slot(i) => {
                let mut j = Jet::constant(vals[*i], k);
                if let Some(d) = seed[*i] {
                    j.g[d] = 1.0;
                }
                Ok(j)
            }
            Node::Unary(f, a) => {
                let a = a.jet(vals, seed, k)?;
                let (_, d1, d2) = f.taylor(a.v);
                // value taken from the same path as `eval` so both agree bit-for-bit
                let out = a.chain(f.value(a.v), d1, d2);
                out.check(f.name())
            }
            Node::Pow(a, n) => {
                let a = a.jet(vals, seed, k)?;
                let n = *n;
                let v = a.v.powi(n as i32);
                let d1 = if n >= 1 { n as f64 * a.v.powi(n as i32 - 1) } else { 0.0 };
                let d2 = if n >= 2 { (n * (n - 1)) as f64 * a.v.powi(n as i32 - 2) } else { 0.0 };
                a.chain(v, d1, d2).check("power")
            }
            Node::Binary(op, a, b) => {
                let a = a.jet(vals, seed, k)?;
                let b = b.jet(vals, seed, k)?;
                let out = match op {
                    BinOp::Add => a.zip(&b, a.v + b.v, |x, y| x + y, |x, y| x + y),
                    BinOp::Sub => a.zip(&b, a.v - b.v, |x, y| x - y, |x, y| x - y),
                    BinOp::Mul => {
                        let mut h = vec![0.0; k * k];
                        for r in 0..k {
                            for c in r..k {
                                let idx = r * k + c;
                                h[idx] = a.v * b.h[idx] + b.v * a.h[idx] + a.g[r] * b.g[c] + b.g[r] * a.g[c];
                            }
                        }
                        let g = (0..k).map(|i| a.v * b.g[i] + b.v * a.g[i]).collect();
                        Jet { v: a.v * b.v, g, h }
                    }
                    BinOp::Div => {
                        let q = a.v / b.v;
                        let g: Vec<f64> = (0..k).map(|i| (a.g[i] - q * b.g[i]) / b.v).collect();
                        let mut h = vec![0.0; k * k];
                        for r in 0..k {
                            for c in r..k {
                                let idx = r * k + c;
                                h[idx] = (a.h[idx] - q * b.h[idx] - g[r] * b.g[c] - b.g[r] * g[c]) / b.v;
                            }
                        }
                        Jet { v: q, g, h }
                    }
                };
                out.check(op.name())
            }
        }
    }
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

/// Second-order forward jet. Only the upper triangle of `h` is maintained.
struct Jet {
    v: f64,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl Jet {
    fn constant(v: f64, k: usize) -> Jet {
        Jet { v, g: vec![0.0; k], h: vec![0.0; k * k] }
    }

    fn chain(&self, v: f64, d1: f64, d2: f64) -> Jet {
        let k = self.g.len();
        let g = self.g.iter().map(|x| d1 * x).collect();
        let mut h = vec![0.0; k * k];
        for r in 0..k {
            for c in r..k {
                let idx = r * k + c;
                h[idx] = d1 * self.h[idx] + d2 * self.g[r] * self.g[c];
            }
        }
        Jet { v, g, h }
    }

    fn zip(&self, o: &Jet, v: f64, fg: impl Fn(f64, f64) -> f64, fh: impl Fn(f64, f64) -> f64) -> Jet {
        Jet {
            v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| fg(*a, *b)).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| fh(*a, *b)).collect(),
        }
    }

    fn check(self, op: &'static str) -> Result<Jet, EvalError> {
        finite(self.v, op)?;
        if self.g.iter().chain(self.h.iter()).all(|x| x.is_finite()) {
            Ok(self)
        } else {
            Err(EvalError::NonFinite { op })
        }
    }
}

/// Value, gradient and Hessian of an expression with respect to a chosen
/// list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    hessian: Vec<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    /// Hessian as rows.
    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let k = self.dim();
        (0..k).map(|i| self.hessian[i * k..(i + 1) * k].to_vec()).collect()
    }
}

/// An expression with variables resolved against a [`Scope`].
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    root: Node,
}

impl Compiled {
    pub fn constant(c: f64) -> Self {
        Compiled { root: Node::Const(c) }
    }

    pub fn eval(&self, vals: &[f64]) -> Result<f64, EvalError> {
        self.root.eval(vals)
    }

    /// Slots the expression actually reads.
    pub fn used_slots(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.root.collect_slots(&mut out);
        out
    }

    /// Jet with respect to the slots listed in `wrt` (in that order).
    pub fn jet2(&self, vals: &[f64], wrt: &[usize]) -> Result<Jet2, EvalError> {
        let mut seed = vec![None; vals.len()];
        for (d, &slot) in wrt.iter().enumerate() {
            seed[slot] = Some(d);
        }
        let k = wrt.len();
        let jet = self.root.jet(vals, &seed, k)?;
        let mut hessian = jet.h;
        for r in 0..k {
            for c in 0..r {
                hessian[r * k + c] = hessian[c * k + r];
            }
        }
        Ok(Jet2 { value: jet.v, gradient: jet.g, hessian })
    }

    /// Value and gradient only (the Hessian slot is still computed).
    pub fn grad(&self, vals: &[f64], wrt: &[usize]) -> Result<(f64, Vec<f64>), EvalError> {
        let j = self.jet2(vals, wrt)?;
        Ok((j.value, j.gradient))
    }
}

fn binding_scope(b: &Binding) -> (Scope, Vec<f64>) {
    let names: Vec<&str> = b.0.keys().map(String::as_str).collect();
    (Scope::new(&names), b.0.values().copied().collect())
}

/// Evaluate `e` with every free variable taken from `b`.
pub fn eval(e: &Expr, b: &Binding) -> Result<f64, EvalError> {
    let (scope, vals) = binding_scope(b);
    e.compile(&scope)?.eval(&vals)
}

/// Value, gradient and Hessian of `e` with respect to `wrt`.
pub fn eval_jet2(e: &Expr, b: &Binding, wrt: &[&str]) -> Result<Jet2, EvalError> {
    let (scope, vals) = binding_scope(b);
    let slots = wrt
        .iter()
        .map(|w| scope.slot(w).ok_or_else(|| EvalError::Unbound(w.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    e.compile(&scope)?.jet2(&vals, &slots)
}
