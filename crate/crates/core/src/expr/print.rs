use super::Expr;
use std::fmt;

// Precedence levels; higher binds tighter.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Pow(..) => POWER,
        Expr::Const(c) if c.is_sign_negative() => UNARY,
        _ => ATOM,
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{c}")
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_const(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Func(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let op = if matches!(self, Expr::Add(..)) { "+" } else { "-" };
                write!(f, "{a} {op} ")?;
                write_wrapped(f, b, precedence(b) <= SUM)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = if matches!(self, Expr::Mul(..)) { "*" } else { "/" };
                write_wrapped(f, a, precedence(a) <= SUM)?;
                write!(f, "{op}")?;
                write_wrapped(f, b, precedence(b) <= PRODUCT)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                // a bare literal after `-` would fold into a negative constant
                let wrap = precedence(a) <= PRODUCT || matches!(**a, Expr::Const(c) if !c.is_sign_negative());
                write_wrapped(f, a, wrap)
            }
            Expr::Pow(a, b) => {
                match **a {
                    Expr::Const(c) if c.is_sign_negative() => write_const(f, c)?,
                    _ => write_wrapped(f, a, precedence(a) < ATOM)?,
                }
                write!(f, "^")?;
                match **b {
                    Expr::Const(c) if c.is_sign_negative() => write_const(f, c),
                    _ => write_wrapped(f, b, precedence(b) < ATOM),
                }
            }
        }
    }
}
