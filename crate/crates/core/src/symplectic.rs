//! Diagonal (possibly weighted) symplectic structures on `T*R^n`, the dual
//! Poisson bracket, and Hamiltonian vector fields.
//!
//! With weights `ξ_j` the 2-form is `ω = Σ ξ_j dp_j ∧ dq_j` and the bracket
//! is fixed to
//!
//! ```text
//! {F, G} = Σ_j ξ_j⁻¹ (∂F/∂p_j ∂G/∂q_j − ∂F/∂q_j ∂G/∂p_j)
//! ```
//!
//! Flows are `du/dt = {H, u}`, which for unit weights gives the usual
//! `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`. Under this convention `{q_i, p_j} = −δ_ij/ξ_i`.

use crate::expr::{EvalError, EvalPoint, Expr, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymplecticError {
    #[error("weight ξ_{index} is zero or not finite")]
    InvalidWeight { index: usize },
    #[error("a symplectic structure needs at least one degree of freedom")]
    Empty,
    #[error("expression references q/p index {index}, beyond dimension {dimension}")]
    DimensionMismatch { index: usize, dimension: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticStructure {
    weights: Vec<f64>,
}

impl SymplecticStructure {
    pub fn new(weights: Vec<f64>) -> Result<Self, SymplecticError> {
        if weights.is_empty() {
            return Err(SymplecticError::Empty);
        }
        if let Some(i) = weights.iter().position(|w| *w == 0.0 || !w.is_finite()) {
            return Err(SymplecticError::InvalidWeight { index: i + 1 });
        }
        Ok(SymplecticStructure { weights })
    }

    /// Unit weights.
    pub fn canonical(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        SymplecticStructure {
            weights: vec![1.0; n],
        }
    }

    /// Degrees of freedom `n`.
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Phase-space dimension `2n`.
    pub fn phase_dimension(&self) -> usize {
        2 * self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_canonical(&self) -> bool {
        self.weights.iter().all(|w| *w == 1.0)
    }

    /// Check that `e` lives on this phase space.
    pub fn check(&self, e: &Expr) -> Result<(), SymplecticError> {
        let index = e.max_index();
        if index > self.n() {
            return Err(SymplecticError::DimensionMismatch {
                index,
                dimension: self.n(),
            });
        }
        Ok(())
    }

    /// Product structure: `self` on the first degrees, `other` after them.
    pub fn product(&self, other: &SymplecticStructure) -> SymplecticStructure {
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        SymplecticStructure { weights }
    }

    /// Symbolic Poisson bracket `{F, G}`, simplified.
    pub fn poisson_bracket(&self, f: &Expr, g: &Expr) -> Expr {
        let terms = (1..=self.n()).filter_map(|j| {
            let fp = f.differentiate(Var::p(j));
            let fq = f.differentiate(Var::q(j));
            let gp = g.differentiate(Var::p(j));
            let gq = g.differentiate(Var::q(j));
            let term = (fp * gq - fq * gp).simplify();
            if term.is_zero() {
                return None;
            }
            let inv = 1.0 / self.weights[j - 1];
            Some(if inv == 1.0 { term } else { Expr::Const(inv) * term })
        });
        Expr::sum(terms).simplify()
    }

    /// Pointwise bracket `{F, G}(u)`.
    pub fn bracket_value(&self, f: &Expr, g: &Expr, u: &EvalPoint) -> Result<f64, EvalError> {
        self.poisson_bracket(f, g).evaluate(u)
    }

    /// Pointwise bracket from precomputed gradients in the flat layout
    /// `[∂/∂q.., ∂/∂p..]`.
    pub fn bracket_from_gradients(&self, df: &[f64], dg: &[f64]) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| (df[n + j] * dg[j] - df[j] * dg[n + j]) / self.weights[j])
            .sum()
    }

    /// Components `(dq_j/dt, dp_j/dt) = ({H, q_j}, {H, p_j})`.
    pub fn hamiltonian_vector_field(&self, h: &Expr) -> VectorFieldExpr {
        let n = self.n();
        let mut components = Vec::with_capacity(2 * n);
        for j in 1..=n {
            let inv = 1.0 / self.weights[j - 1];
            components.push((Expr::Const(inv) * h.differentiate(Var::p(j))).simplify());
        }
        for j in 1..=n {
            let inv = 1.0 / self.weights[j - 1];
            components.push((Expr::Const(-inv) * h.differentiate(Var::q(j))).simplify());
        }
        VectorFieldExpr { n, components }
    }
}

/// A vector field on `R^{2n}` given by `2n` expressions in the flat layout
/// `[dq_1..dq_n, dp_1..dp_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr {
    n: usize,
    components: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn new(n: usize, components: Vec<Expr>) -> Self {
        assert_eq!(components.len(), 2 * n, "need 2n components");
        VectorFieldExpr { n, components }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn dq(&self, j: usize) -> &Expr {
        &self.components[j - 1]
    }

    pub fn dp(&self, j: usize) -> &Expr {
        &self.components[self.n + j - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Evaluate all components at `u` into `out`.
    pub fn evaluate_into(&self, u: &EvalPoint, out: &mut [f64]) -> Result<(), EvalError> {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            *slot = c.evaluate(u)?;
        }
        Ok(())
    }

    pub fn evaluate(&self, u: &EvalPoint) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; 2 * self.n];
        self.evaluate_into(u, &mut out)?;
        Ok(out)
    }

    /// Scale every component, e.g. to reverse time.
    pub fn scaled(&self, factor: f64) -> VectorFieldExpr {
        VectorFieldExpr {
            n: self.n,
            components: self
                .components
                .iter()
                .map(|c| (Expr::Const(factor) * c.clone()).simplify())
                .collect(),
        }
    }
}
