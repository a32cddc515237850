//! Light-weight normalisation: constant folding, 0/1 identities, flattening
//! of nested sums and products, merging of like terms and repeated factors.
//! Products of sums are not expanded.

use super::eval::{apply_func, checked_pow};
use super::{Expr, VarKind};
use std::collections::BTreeMap;

impl Expr {
    /// Return an expression that evaluates to the same value wherever both
    /// are defined.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => self.clone(),
            Expr::Func(g, a) => {
                let a = a.simplify();
                if let Some(c) = a.as_const() {
                    if let Ok(v) = apply_func(*g, c) {
                        if v.is_finite() {
                            return Expr::Const(v);
                        }
                    }
                }
                Expr::Func(*g, Box::new(a))
            }
            Expr::Pow(a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (a.as_const(), b.as_const()) {
                    (Some(x), Some(y)) => match checked_pow(x, y) {
                        Ok(v) if v.is_finite() => Expr::Const(v),
                        _ => a.pow(b),
                    },
                    (_, Some(y)) if y == 1.0 => a,
                    (_, Some(y)) if y == 0.0 => Expr::one(),
                    (_, Some(_)) => Sum::collect(&a.pow(b)).rebuild(),
                    _ => a.pow(b),
                }
            }
            Expr::Neg(a) => Sum::collect(&-a.simplify()).rebuild(),
            Expr::Add(a, b) => Sum::collect(&(a.simplify() + b.simplify())).rebuild(),
            Expr::Sub(a, b) => Sum::collect(&(a.simplify() - b.simplify())).rebuild(),
            Expr::Mul(a, b) => Sum::collect(&(a.simplify() * b.simplify())).rebuild(),
            Expr::Div(a, b) => Sum::collect(&(a.simplify() / b.simplify())).rebuild(),
        }
    }
}

/// Ordering key for factors and terms: parameters, then q's, then p's, then
/// everything else, each by index / printed form.
fn sort_key(e: &Expr) -> (u8, usize, String) {
    match e {
        Expr::Param(name) => (0, 0, name.clone()),
        Expr::Var(v) => (if v.kind == VarKind::Q { 1 } else { 2 }, v.index, String::new()),
        Expr::Pow(base, _) => {
            let (class, index, text) = sort_key(base);
            (class, index, text + "^")
        }
        _ => (3, 0, e.to_string()),
    }
}

/// `coef * Π base^exponent`
#[derive(Debug, Clone)]
struct Product {
    coef: f64,
    factors: BTreeMap<(u8, usize, String), (Expr, f64)>,
}

impl Product {
    fn scalar(coef: f64) -> Self {
        Product {
            coef,
            factors: BTreeMap::new(),
        }
    }

    fn factor(base: Expr, exponent: f64) -> Self {
        let mut p = Product::scalar(1.0);
        p.push(base, exponent);
        p
    }

    fn push(&mut self, base: Expr, exponent: f64) {
        // key on the base alone so repeated factors merge
        let key = match &base {
            Expr::Param(name) => (0, 0, name.clone()),
            Expr::Var(v) => (if v.kind == VarKind::Q { 1 } else { 2 }, v.index, String::new()),
            other => (3, 0, other.to_string()),
        };
        let entry = self.factors.entry(key.clone()).or_insert((base, 0.0));
        entry.1 += exponent;
        if entry.1 == 0.0 {
            self.factors.remove(&key);
        }
    }

    fn merge(mut self, other: Product) -> Self {
        self.coef *= other.coef;
        for (_, (base, exp)) in other.factors {
            self.push(base, exp);
        }
        self
    }

    /// Raise to an integer power; `None` when the coefficient is zero and the
    /// power negative.
    fn powi(self, n: f64) -> Option<Product> {
        if self.coef == 0.0 && n < 0.0 {
            return None;
        }
        let mut out = Product::scalar(self.coef.powi(n as i32));
        for (_, (base, exp)) in self.factors {
            out.push(base, exp * n);
        }
        Some(out)
    }

    fn collect(e: &Expr) -> Product {
        match e {
            Expr::Const(c) => Product::scalar(*c),
            Expr::Neg(a) => {
                let mut p = Product::collect(a);
                p.coef = -p.coef;
                p
            }
            Expr::Mul(a, b) => Product::collect(a).merge(Product::collect(b)),
            Expr::Div(a, b) => match Product::collect(b).powi(-1.0) {
                Some(inv) => Product::collect(a).merge(inv),
                None => Product::factor(e.clone(), 1.0),
            },
            Expr::Pow(a, b) => match b.as_const() {
                Some(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => {
                    match Product::collect(a).powi(c) {
                        Some(p) => p,
                        None => Product::factor(e.clone(), 1.0),
                    }
                }
                Some(c) => Product::factor((**a).clone(), c),
                None => Product::factor(e.clone(), 1.0),
            },
            _ => Product::factor(e.clone(), 1.0),
        }
    }

    /// The monomial without its coefficient, or `None` for a pure scalar.
    fn monomial(&self) -> Option<Expr> {
        if self.factors.is_empty() {
            return None;
        }
        let mut sorted: Vec<&(Expr, f64)> = self.factors.values().collect();
        sorted.sort_by_key(|x| sort_key(&x.0));
        let power = |base: &Expr, exp: f64| {
            if exp == 1.0 {
                base.clone()
            } else {
                base.clone().pow(Expr::Const(exp))
            }
        };
        let num: Vec<Expr> = sorted
            .iter()
            .filter(|(_, e)| *e > 0.0)
            .map(|(b, e)| power(b, *e))
            .collect();
        let den: Vec<Expr> = sorted
            .iter()
            .filter(|(_, e)| *e < 0.0)
            .map(|(b, e)| power(b, -*e))
            .collect();
        let num = if num.is_empty() { Expr::one() } else { Expr::product(num) };
        Some(if den.is_empty() {
            num
        } else {
            num / Expr::product(den)
        })
    }
}

fn scaled(coef: f64, monomial: Expr) -> Expr {
    if coef == 1.0 {
        return monomial;
    }
    if coef == -1.0 {
        return -monomial;
    }
    match monomial {
        // c * (1/x) reads better as c/x
        Expr::Div(num, den) if num.as_const() == Some(1.0) => Expr::Const(coef) / *den,
        m => Expr::Const(coef) * m,
    }
}

/// `constant + Σ coef * monomial`
#[derive(Debug, Clone, Default)]
struct Sum {
    constant: f64,
    terms: BTreeMap<(u8, usize, String), (f64, Expr)>,
}

impl Sum {
    fn collect(e: &Expr) -> Sum {
        let mut sum = Sum::default();
        sum.add(e, 1.0);
        sum
    }

    fn add(&mut self, e: &Expr, sign: f64) {
        match e {
            Expr::Const(c) => self.constant += sign * c,
            Expr::Add(a, b) => {
                self.add(a, sign);
                self.add(b, sign);
            }
            Expr::Sub(a, b) => {
                self.add(a, sign);
                self.add(b, -sign);
            }
            Expr::Neg(a) => self.add(a, -sign),
            _ => {
                let product = Product::collect(e);
                let coef = sign * product.coef;
                if coef == 0.0 {
                    return;
                }
                // distribute a scalar over a single sum factor
                if product.factors.len() == 1 {
                    let (base, exp) = product.factors.values().next().expect("one factor");
                    if *exp == 1.0 && matches!(base, Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_)) {
                        let base = base.clone();
                        self.add(&base, coef);
                        return;
                    }
                }
                match product.monomial() {
                    None => self.constant += coef,
                    Some(m) => {
                        let (class, index, _) = sort_key(&m);
                        let key = (class, index, m.to_string());
                        let entry = self.terms.entry(key).or_insert((0.0, m));
                        entry.0 += coef;
                    }
                }
            }
        }
    }

    fn rebuild(self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (_, (coef, m)) in self.terms {
            if coef == 0.0 {
                continue;
            }
            acc = Some(match acc {
                None => scaled(coef, m),
                Some(prev) if coef < 0.0 => prev - scaled(-coef, m),
                Some(prev) => prev + scaled(coef, m),
            });
        }
        match acc {
            None => Expr::Const(self.constant),
            Some(e) if self.constant == 0.0 => e,
            Some(e) if self.constant < 0.0 => e - Expr::Const(-self.constant),
            Some(e) => e + Expr::Const(self.constant),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn s(text: &str) -> Expr {
        parse(text, 3).unwrap().simplify()
    }

    fn e(text: &str) -> Expr {
        parse(text, 3).unwrap()
    }

    #[test]
    fn zero_and_one_identities() {
        assert_eq!(s("0*q1 + p1"), e("p1"));
        assert_eq!(s("1*q1"), e("q1"));
        assert_eq!(s("q1^1"), e("q1"));
        assert_eq!(s("q1^0"), e("1"));
        assert_eq!(s("q1/1"), e("q1"));
        assert_eq!(s("0/q1"), e("0"));
    }

    #[test]
    fn cancellation() {
        assert_eq!(s("q1 - q1"), Expr::zero());
        assert_eq!(s("q1*p1 - p1*q1"), Expr::zero());
        assert_eq!(s("q1/q1"), Expr::one());
        assert_eq!(s("2*(q1 + p1) - 2*q1"), e("2*p1"));
    }

    #[test]
    fn constant_folding() {
        assert_eq!(s("2*(q1*3)"), e("6*q1"));
        assert_eq!(s("2 + 3*4"), e("14"));
        assert_eq!(s("2^3"), e("8"));
        assert_eq!(s("ln(1)"), e("0"));
        assert_eq!(s("q1*q1"), e("q1^2"));
        assert_eq!(s("-(-q1)"), e("q1"));
    }

    #[test]
    fn keeps_undefined_folds_symbolic() {
        // ln(-1) cannot be folded; stays as is
        assert_eq!(s("ln(-1)"), e("ln(-1)"));
        assert_eq!(s("q1/0"), e("q1/0"));
    }

    #[test]
    fn simplified_output_is_stable() {
        for text in ["q1*p1 + 3 - 2*q2^2/p3", "(q1+p1)^2 - 2*(q1+p1)^2", "sin(q1)*cos(q1)/sin(q1)"] {
            let once = s(text);
            assert_eq!(once.simplify(), once, "{text}");
        }
    }
}
