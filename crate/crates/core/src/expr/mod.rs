//! Symbolic expressions over the phase-space coordinates `q1..qn`, `p1..pn`
//! and named real parameters.
//!
//! Expressions are immutable trees. They can be parsed from text, printed
//! back (the printer and parser round-trip structurally), differentiated,
//! simplified and evaluated at an [`EvalPoint`].

mod diff;
mod equiv;
mod eval;
pub mod gen;
mod parse;
mod print;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;

pub use equiv::{numerically_equivalent, EquivalenceError};
pub use eval::{EvalError, EvalPoint};
pub use parse::{parse, ParseError};

/// Which half of the phase space a variable lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Q,
    P,
}

/// A phase-space coordinate `q_k` or `p_k` with a 1-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    pub fn q(index: usize) -> Self {
        assert!(index >= 1, "variable indices are 1-based");
        Var { kind: VarKind::Q, index }
    }

    pub fn p(index: usize) -> Self {
        assert!(index >= 1, "variable indices are 1-based");
        Var { kind: VarKind::P, index }
    }

    /// Position in the flat state layout `[q1..qn, p1..pn]`.
    pub fn slot(&self, n: usize) -> usize {
        match self.kind {
            VarKind::Q => self.index - 1,
            VarKind::P => n + self.index - 1,
        }
    }

    /// Inverse of [`Var::slot`].
    pub fn from_slot(slot: usize, n: usize) -> Self {
        if slot < n {
            Var::q(slot + 1)
        } else {
            Var::p(slot - n + 1)
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Q => write!(f, "q{}", self.index),
            VarKind::P => write!(f, "p{}", self.index),
        }
    }
}

/// Elementary unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Ln,
    Sqrt,
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            _ => return None,
        })
    }

    pub const ALL: [Func; 5] = [Func::Ln, Func::Sqrt, Func::Sin, Func::Cos, Func::Exp];
}

/// Symbolic expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// Serialized as its printed form.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text, usize::MAX).map_err(serde::de::Error::custom)
    }
}

/// A differentiation target: a phase-space variable or a named parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol<'a> {
    Var(Var),
    Param(&'a str),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn q(index: usize) -> Self {
        Expr::Var(Var::q(index))
    }

    pub fn p(index: usize) -> Self {
        Expr::Var(Var::p(index))
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::Param(name.into())
    }

    pub fn func(f: Func, arg: Expr) -> Self {
        Expr::Func(f, Box::new(arg))
    }

    pub fn ln(self) -> Self {
        Expr::func(Func::Ln, self)
    }

    pub fn sqrt(self) -> Self {
        Expr::func(Func::Sqrt, self)
    }

    pub fn sin(self) -> Self {
        Expr::func(Func::Sin, self)
    }

    pub fn cos(self) -> Self {
        Expr::func(Func::Cos, self)
    }

    pub fn exp(self) -> Self {
        Expr::func(Func::Exp, self)
    }

    pub fn pow(self, exponent: Expr) -> Self {
        Expr::Pow(Box::new(self), Box::new(exponent))
    }

    pub fn powi(self, exponent: i32) -> Self {
        self.pow(Expr::Const(exponent as f64))
    }

    /// Sum of an iterator of expressions; the empty sum is `0`.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Self {
        terms
            .into_iter()
            .reduce(|acc, t| acc + t)
            .unwrap_or_else(Expr::zero)
    }

    /// Product of an iterator of expressions; the empty product is `1`.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Self {
        factors
            .into_iter()
            .reduce(|acc, t| acc * t)
            .unwrap_or_else(Expr::one)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Largest variable index referenced, or 0 if the expression has none.
    pub fn max_index(&self) -> usize {
        let mut max = 0;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                max = max.max(v.index);
            }
        });
        max
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(*v);
            }
        });
        out
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(name) = e {
                out.insert(name.clone());
            }
        });
        out
    }

    /// True when no phase-space variable occurs in the expression.
    pub fn is_free_of_variables(&self) -> bool {
        self.max_index() == 0
    }

    pub fn depends_on(&self, sym: Symbol<'_>) -> bool {
        let mut found = false;
        self.visit(&mut |e| match (e, sym) {
            (Expr::Var(v), Symbol::Var(w)) if *v == w => found = true,
            (Expr::Param(n), Symbol::Param(m)) if n == m => found = true,
            _ => {}
        });
        found
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |_| count += 1);
        count
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => {}
            Expr::Neg(a) | Expr::Func(_, a) => a.visit(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Rebuild the tree bottom-up, replacing leaves with `leaf(e)` when it
    /// returns `Some`.
    pub fn map_leaves(&self, leaf: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => {
                leaf(self).unwrap_or_else(|| self.clone())
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_leaves(leaf))),
            Expr::Func(g, a) => Expr::Func(*g, Box::new(a.map_leaves(leaf))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.map_leaves(leaf)), Box::new(b.map_leaves(leaf))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.map_leaves(leaf)), Box::new(b.map_leaves(leaf))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.map_leaves(leaf)), Box::new(b.map_leaves(leaf))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.map_leaves(leaf)), Box::new(b.map_leaves(leaf))),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.map_leaves(leaf)), Box::new(b.map_leaves(leaf))),
        }
    }

    /// Shift every variable index by `offset`; used to embed a system into a
    /// product phase space.
    pub fn shift_indices(&self, offset: usize) -> Expr {
        self.map_leaves(&|e| match e {
            Expr::Var(v) => Some(Expr::Var(Var {
                kind: v.kind,
                index: v.index + offset,
            })),
            _ => None,
        })
    }

    /// Replace named parameters by expressions.
    pub fn substitute_params(&self, bindings: &impl Fn(&str) -> Option<Expr>) -> Expr {
        self.map_leaves(&|e| match e {
            Expr::Param(name) => bindings(name),
            _ => None,
        })
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl ops::Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Const(self) * rhs
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::Var(v)
    }
}
