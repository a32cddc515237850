use super::{Expr, Func, Var, VarKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("variable {var} is not bound by a point of dimension {dimension}")]
    VariableOutOfRange { var: Var, dimension: usize },
}

/// A concrete phase point with parameter bindings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl EvalPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have equal length");
        EvalPoint {
            q,
            p,
            params: BTreeMap::new(),
        }
    }

    /// Build from the flat layout `[q1..qn, p1..pn]`.
    pub fn from_state(state: &[f64], params: BTreeMap<String, f64>) -> Self {
        assert!(state.len().is_multiple_of(2), "state length must be even");
        let n = state.len() / 2;
        EvalPoint {
            q: state[..n].to_vec(),
            p: state[n..].to_vec(),
            params,
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn with_params(mut self, params: &BTreeMap<String, f64>) -> Self {
        self.params
            .extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    pub fn dimension(&self) -> usize {
        self.q.len()
    }

    /// Flat state `[q1..qn, p1..pn]`.
    pub fn state(&self) -> Vec<f64> {
        let mut s = self.q.clone();
        s.extend_from_slice(&self.p);
        s
    }

    pub fn set_state(&mut self, state: &[f64]) {
        let n = self.q.len();
        assert_eq!(state.len(), 2 * n);
        self.q.copy_from_slice(&state[..n]);
        self.p.copy_from_slice(&state[n..]);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        let slot = var.index.checked_sub(1)?;
        match var.kind {
            VarKind::Q => self.q.get(slot).copied(),
            VarKind::P => self.p.get(slot).copied(),
        }
    }

    pub fn set(&mut self, var: Var, value: f64) {
        let slot = var.index - 1;
        match var.kind {
            VarKind::Q => self.q[slot] = value,
            VarKind::P => self.p[slot] = value,
        }
    }
}

fn domain(message: impl Into<String>) -> EvalError {
    EvalError::Domain(message.into())
}

/// Integer exponents (within i32) use repeated multiplication semantics and
/// accept any base except zero with a negative exponent; real exponents
/// require a positive base.
pub(crate) fn checked_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(domain("0 raised to a negative power"));
        }
        return Ok(base.powi(exponent as i32));
    }
    if base > 0.0 {
        Ok(base.powf(exponent))
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else {
        Err(domain(format!("non-positive base {base} with real exponent {exponent}")))
    }
}

pub(crate) fn apply_func(func: Func, x: f64) -> Result<f64, EvalError> {
    match func {
        Func::Ln if x <= 0.0 => Err(domain(format!("ln of non-positive value {x}"))),
        Func::Ln => Ok(x.ln()),
        Func::Sqrt if x < 0.0 => Err(domain(format!("sqrt of negative value {x}"))),
        Func::Sqrt => Ok(x.sqrt()),
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
    }
}

impl Expr {
    /// Evaluate at a fully bound point.
    pub fn evaluate(&self, u: &EvalPoint) -> Result<f64, EvalError> {
        let value = self.eval_node(u)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(domain("non-finite result"))
        }
    }

    fn eval_node(&self, u: &EvalPoint) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => u.get(*v).ok_or(EvalError::VariableOutOfRange {
                var: *v,
                dimension: u.dimension(),
            })?,
            Expr::Param(name) => *u
                .params
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval_node(u)?,
            Expr::Func(g, a) => apply_func(*g, a.eval_node(u)?)?,
            Expr::Add(a, b) => a.eval_node(u)? + b.eval_node(u)?,
            Expr::Sub(a, b) => a.eval_node(u)? - b.eval_node(u)?,
            Expr::Mul(a, b) => a.eval_node(u)? * b.eval_node(u)?,
            Expr::Div(a, b) => {
                let num = a.eval_node(u)?;
                let den = b.eval_node(u)?;
                if den == 0.0 {
                    return Err(domain("division by zero"));
                }
                num / den
            }
            Expr::Pow(a, b) => checked_pow(a.eval_node(u)?, b.eval_node(u)?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn arithmetic() {
        let e = parse("q1*p1", 1).unwrap();
        let u = EvalPoint::new(vec![2.0], vec![3.0]);
        assert_eq!(e.evaluate(&u).unwrap(), 6.0);
    }

    #[test]
    fn domain_errors() {
        let u = EvalPoint::new(vec![-1.0], vec![0.0]);
        assert!(matches!(parse("ln(q1)", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        assert!(matches!(parse("1/p1", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        assert!(matches!(parse("p1^-1", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        assert!(matches!(parse("q1^0.5", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        assert!(matches!(parse("sqrt(q1)", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        assert!(matches!(parse("exp(1000)", 1).unwrap().evaluate(&u), Err(EvalError::Domain(_))));
        // integer exponents of negative bases are fine
        assert_eq!(parse("q1^3", 1).unwrap().evaluate(&u).unwrap(), -1.0);
    }

    #[test]
    fn unbound_symbols() {
        let u = EvalPoint::new(vec![1.0], vec![1.0]);
        assert_eq!(
            parse("g*q1", 1).unwrap().evaluate(&u),
            Err(EvalError::Unbound("g".into()))
        );
        assert_eq!(parse("g*q1", 1).unwrap().evaluate(&u.clone().with_param("g", 2.0)), Ok(2.0));
        assert!(matches!(
            parse("q2", 2).unwrap().evaluate(&u),
            Err(EvalError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn vortex_collision_is_a_domain_error() {
        // H for three vortices with xi = (1, 1, -2), vortices 1 and 2 coincide
        let h = parse(
            "-(1/(2*3.141592653589793))*(ln((q1-q2)^2+(p1-p2)^2) - 2*ln((q1-q3)^2+(p1-p3)^2) - 2*ln((q2-q3)^2+(p2-p3)^2))",
            3,
        )
        .unwrap();
        let u = EvalPoint::new(vec![0.5, 0.5, 1.0], vec![1.0, 1.0, -1.0]);
        assert!(matches!(h.evaluate(&u), Err(EvalError::Domain(_))));
    }

    #[test]
    fn state_layout() {
        let u = EvalPoint::from_state(&[1.0, 2.0, 3.0, 4.0], BTreeMap::new());
        assert_eq!(u.q, vec![1.0, 2.0]);
        assert_eq!(u.p, vec![3.0, 4.0]);
        assert_eq!(u.state(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(Var::p(2).slot(2), 3);
        assert_eq!(Var::from_slot(3, 2), Var::p(2));
    }
}
