use super::{Expr, Func, Symbol, Var};

impl Expr {
    /// Exact partial derivative with respect to a phase-space variable,
    /// simplified.
    pub fn differentiate(&self, v: Var) -> Expr {
        self.differentiate_symbol(Symbol::Var(v))
    }

    /// Partial derivative with respect to a named parameter, simplified.
    pub fn differentiate_param(&self, name: &str) -> Expr {
        self.differentiate_symbol(Symbol::Param(name))
    }

    pub fn differentiate_symbol(&self, sym: Symbol<'_>) -> Expr {
        derivative(self, sym).simplify()
    }

    /// Gradient `[∂/∂q1..∂/∂qn, ∂/∂p1..∂/∂pn]`.
    pub fn gradient(&self, n: usize) -> Vec<Expr> {
        (0..2 * n)
            .map(|slot| self.differentiate(Var::from_slot(slot, n)))
            .collect()
    }
}

fn derivative(e: &Expr, sym: Symbol<'_>) -> Expr {
    if !e.depends_on(sym) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(_) | Expr::Param(_) => Expr::one(),
        Expr::Neg(a) => -derivative(a, sym),
        Expr::Add(a, b) => derivative(a, sym) + derivative(b, sym),
        Expr::Sub(a, b) => derivative(a, sym) - derivative(b, sym),
        Expr::Mul(a, b) => {
            derivative(a, sym) * (**b).clone() + (**a).clone() * derivative(b, sym)
        }
        Expr::Div(a, b) => {
            let num = derivative(a, sym) * (**b).clone() - (**a).clone() * derivative(b, sym);
            num / (**b).clone().powi(2)
        }
        Expr::Pow(a, b) => {
            if !b.depends_on(sym) {
                // b * a^(b-1) * a'
                let reduced = match b.as_const() {
                    Some(c) => Expr::Const(c - 1.0),
                    None => (**b).clone() - Expr::one(),
                };
                (**b).clone() * (**a).clone().pow(reduced) * derivative(a, sym)
            } else if !a.depends_on(sym) {
                e.clone() * (**a).clone().ln() * derivative(b, sym)
            } else {
                // a^b * (b' ln a + b a' / a)
                e.clone()
                    * (derivative(b, sym) * (**a).clone().ln()
                        + (**b).clone() * derivative(a, sym) / (**a).clone())
            }
        }
        Expr::Func(g, a) => {
            let inner = derivative(a, sym);
            let a = (**a).clone();
            let outer = match g {
                Func::Ln => return inner / a,
                Func::Sqrt => return inner / (Expr::Const(2.0) * a.sqrt()),
                Func::Sin => a.cos(),
                Func::Cos => -a.sin(),
                Func::Exp => a.exp(),
            };
            outer * inner
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, EvalPoint};
    use super::*;

    #[test]
    fn power_rule() {
        let e = parse("q1^2", 1).unwrap();
        assert_eq!(e.differentiate(Var::q(1)), parse("2*q1", 1).unwrap());
    }

    #[test]
    fn independent_variable() {
        let e = parse("p2", 2).unwrap();
        assert_eq!(e.differentiate(Var::q(1)), Expr::zero());
        assert_eq!(parse("g*q1", 1).unwrap().differentiate(Var::p(1)), Expr::zero());
    }

    #[test]
    fn log_distance_matches_finite_difference() {
        let e = parse("ln((q1-q2)^2 + (p1-p2)^2)", 2).unwrap();
        let d = e.differentiate(Var::q(1));
        let u = EvalPoint::new(vec![0.7, -1.3], vec![1.1, 0.4]);
        let step = 1e-5;
        let mut plus = u.clone();
        plus.q[0] += step;
        let mut minus = u.clone();
        minus.q[0] -= step;
        let fd = (e.evaluate(&plus).unwrap() - e.evaluate(&minus).unwrap()) / (2.0 * step);
        let exact = d.evaluate(&u).unwrap();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
    }

    #[test]
    fn variable_exponent() {
        // d/dq1 q1^q1 = q1^q1 (ln q1 + 1)
        let e = parse("q1^p1", 1).unwrap();
        let d = e.differentiate(Var::q(1));
        let u = EvalPoint::new(vec![1.7], vec![2.3]);
        let expected = 2.3 * 1.7f64.powf(1.3);
        assert!((d.evaluate(&u).unwrap() - expected).abs() < 1e-12);
        let d = e.differentiate(Var::p(1));
        let expected = 1.7f64.powf(2.3) * 1.7f64.ln();
        assert!((d.evaluate(&u).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn parameter_derivative() {
        let e = parse("w^2 + lam^2 - 2*h1", 1).unwrap();
        assert_eq!(e.differentiate_param("h1"), Expr::Const(-2.0));
        assert_eq!(e.differentiate_param("w"), parse("2*w", 1).unwrap());
    }
}
