//! Lie-algebraic structure of a finite set of invariants.
//!
//! An [`InvariantSet`] is a candidate Lie algebra `G = span{H_1..H_k}` under
//! the Poisson bracket of its [`SymplecticStructure`]. The submodules decide
//! closure and solvability ([`structure`]), rank, Cartan subalgebras and the
//! Mishchenko–Fomenko condition ([`rank`]), and search for commuting
//! completions ([`completion`]).

pub mod completion;
pub mod rank;
pub mod structure;

use crate::expr::{EvalError, EvalPoint, Expr};
use crate::sampling::{sample_point, SeedStream};
use crate::symplectic::{SymplecticError, SymplecticStructure};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use thiserror::Error;

pub use completion::{
    dual_abelian_pointwise, search_polynomial_completion, CompletionCandidate, CompletionOptions,
    DualAbelian,
};
pub use rank::{
    algebra_rank, bracket_matrix_at, cartan_basis_at, find_level_point, functional_independence,
    mishchenko_fomenko_check, CartanBasis, LevelSearch, MfReport, RankReport, RegularElement,
};
pub use structure::{check_closure, fit_structure_constants, is_solvable, StructureConstants};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("an invariant set needs at least one member")]
    Empty,
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("could not draw {wanted} points off the singular locus in {attempts} attempts")]
    Sampling { wanted: usize, attempts: usize },
    #[error("need at least {needed} probe points, got {got}")]
    TooFewProbes { needed: usize, got: usize },
    #[error("every probe point lies in the singular locus")]
    AllProbesSingular,
    #[error("level-set search did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },
    #[error("target has {got} values but the set has {expected} invariants")]
    TargetLength { expected: usize, got: usize },
    #[error("regular element has no witness point; locate one on the level set first")]
    MissingWitness,
    #[error("element is not regular: kernel dimension {witness} at the witness exceeds the generic value {generic}")]
    NonRegular { witness: usize, generic: usize },
    #[error("completion degree {0} is not supported (use 1 or 2)")]
    UnsupportedDegree(usize),
    #[error("generator index {0} is out of range")]
    GeneratorIndex(usize),
    #[error("complement bracket matrix is degenerate at the witness")]
    DegenerateComplement,
    #[error("Mishchenko–Fomenko condition fails: dim G + rank G = {lhs}, dim M = {dim_m}")]
    MishchenkoFomenko { lhs: usize, dim_m: usize },
}

/// Named invariants `H_1..H_k` on one phase space, with parameter bindings.
#[derive(Debug, Clone)]
pub struct InvariantSet {
    structure: SymplecticStructure,
    names: Vec<String>,
    members: Vec<Expr>,
    params: BTreeMap<String, f64>,
    brackets: OnceLock<Vec<Vec<Expr>>>,
    gradients: OnceLock<Vec<Vec<Expr>>>,
}

impl InvariantSet {
    pub fn new(
        structure: SymplecticStructure,
        members: Vec<(String, Expr)>,
    ) -> Result<Self, AlgebraError> {
        if members.is_empty() {
            return Err(AlgebraError::Empty);
        }
        for (_, e) in &members {
            structure.check(e)?;
        }
        let (names, members) = members.into_iter().unzip();
        Ok(InvariantSet {
            structure,
            names,
            members,
            params: BTreeMap::new(),
            brackets: OnceLock::new(),
            gradients: OnceLock::new(),
        })
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn structure(&self) -> &SymplecticStructure {
        &self.structure
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Number of invariants `k = dim G`.
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Degrees of freedom `n`.
    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn members(&self) -> &[Expr] {
        &self.members
    }

    pub fn member(&self, name: &str) -> Option<&Expr> {
        self.names.iter().position(|n| n == name).map(|i| &self.members[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Subset of members, in the given order.
    pub fn subset(&self, indices: &[usize]) -> InvariantSet {
        let members = indices
            .iter()
            .map(|&i| (self.names[i].clone(), self.members[i].clone()))
            .collect();
        InvariantSet::new(self.structure.clone(), members)
            .expect("subset of a valid set")
            .with_params(self.params.clone())
    }

    /// Set on the product phase space: `other`'s members act on the degrees
    /// after this set's. Clashing names get `_1` / `_2` suffixes.
    pub fn product(&self, other: &InvariantSet) -> InvariantSet {
        let offset = self.n();
        let clash = |name: &String, list: &[String]| list.contains(name);
        let mut members = Vec::with_capacity(self.k() + other.k());
        for (name, e) in self.names.iter().zip(&self.members) {
            let name = if clash(name, &other.names) { format!("{name}_1") } else { name.clone() };
            members.push((name, e.clone()));
        }
        for (name, e) in other.names.iter().zip(&other.members) {
            let name = if clash(name, &self.names) { format!("{name}_2") } else { name.clone() };
            members.push((name, e.shift_indices(offset)));
        }
        let mut params = self.params.clone();
        params.extend(other.params.iter().map(|(k, v)| (k.clone(), *v)));
        InvariantSet::new(self.structure.product(&other.structure), members)
            .expect("product of valid sets")
            .with_params(params)
    }

    /// Symbolic bracket table `{H_i, H_j}`, computed once.
    pub fn bracket_table(&self) -> &Vec<Vec<Expr>> {
        self.brackets.get_or_init(|| {
            let k = self.k();
            let mut table = vec![vec![Expr::zero(); k]; k];
            for i in 0..k {
                for j in (i + 1)..k {
                    let b = self.structure.poisson_bracket(&self.members[i], &self.members[j]);
                    table[j][i] = (-b.clone()).simplify();
                    table[i][j] = b;
                }
            }
            table
        })
    }

    /// Symbolic gradients of every member in the flat layout.
    pub fn gradients(&self) -> &Vec<Vec<Expr>> {
        self.gradients
            .get_or_init(|| self.members.iter().map(|m| m.gradient(self.n())).collect())
    }

    /// A point at the given state carrying this set's parameter bindings.
    pub fn point(&self, q: Vec<f64>, p: Vec<f64>) -> EvalPoint {
        EvalPoint::new(q, p).with_params(&self.params)
    }

    pub fn values_at(&self, u: &EvalPoint) -> Result<Vec<f64>, EvalError> {
        self.members.iter().map(|m| m.evaluate(u)).collect()
    }

    /// `k × 2n` Jacobian of `(H_1..H_k)` at `u`.
    pub fn jacobian_at(&self, u: &EvalPoint) -> Result<DMatrix<f64>, EvalError> {
        let grads = self.gradients();
        let cols = 2 * self.n();
        let mut jac = DMatrix::zeros(self.k(), cols);
        for (i, row) in grads.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                jac[(i, j)] = d.evaluate(u)?;
            }
        }
        Ok(jac)
    }

    /// Combination `Σ c_i H_i`, simplified.
    pub fn combination(&self, coefficients: &[f64]) -> Expr {
        assert_eq!(coefficients.len(), self.k());
        Expr::sum(
            coefficients
                .iter()
                .zip(&self.members)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, m)| *c * m.clone()),
        )
        .simplify()
    }

    /// Draw `count` points (coordinates uniform on `[-2,-0.5] ∪ [0.5,2]`) at
    /// which every member and every bracket evaluates, resampling on domain
    /// errors up to 10x oversampling.
    pub fn sample_points(
        &self,
        seeds: &SeedStream,
        label: &str,
        count: usize,
    ) -> Result<Vec<EvalPoint>, AlgebraError> {
        let mut rng = seeds.rng(label);
        let table = self.bracket_table();
        let max_attempts = 10 * count.max(1);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            if attempts == max_attempts {
                return Err(AlgebraError::Sampling {
                    wanted: count,
                    attempts,
                });
            }
            attempts += 1;
            let u = sample_point(&mut rng, self.n(), &self.params);
            let ok = self.members.iter().all(|m| m.evaluate(&u).is_ok())
                && table.iter().flatten().all(|b| b.evaluate(&u).is_ok());
            if ok {
                out.push(u);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    //! Small fixtures shared by the algebra unit tests.
    use super::*;
    use crate::expr::parse;

    pub fn vortex_set(xi: &[f64]) -> InvariantSet {
        let n = xi.len();
        let s = SymplecticStructure::new(xi.to_vec()).unwrap();
        let p1 = Expr::sum((1..=n).map(|j| xi[j - 1] * Expr::q(j))).simplify();
        let p2 = Expr::sum((1..=n).map(|j| xi[j - 1] * Expr::p(j))).simplify();
        let p = Expr::sum(
            (1..=n).map(|j| (0.5 * xi[j - 1]) * (Expr::q(j).powi(2) + Expr::p(j).powi(2))),
        )
        .simplify();
        let mut terms = Vec::new();
        for i in 1..=n {
            for j in (i + 1)..=n {
                let d2 = (Expr::q(i) - Expr::q(j)).powi(2) + (Expr::p(i) - Expr::p(j)).powi(2);
                terms.push((xi[i - 1] * xi[j - 1]) * d2.ln());
            }
        }
        let h = (Expr::Const(-1.0 / (2.0 * std::f64::consts::PI)) * Expr::sum(terms)).simplify();
        InvariantSet::new(
            s,
            vec![("P1".into(), p1), ("P2".into(), p2), ("P".into(), p), ("H".into(), h)],
        )
        .unwrap()
    }

    pub fn central_field_set() -> InvariantSet {
        let s = SymplecticStructure::canonical(3);
        let m = |name: &str, text: &str| (name.to_string(), parse(text, 3).unwrap());
        InvariantSet::new(
            s,
            vec![
                m("H", "(p1^2 + p2^2 + p3^2)/2 + (q1^2 + q2^2 + q3^2)/2"),
                m("P1", "p2*q3 - p3*q2"),
                m("P2", "p3*q1 - p1*q3"),
                m("P3", "p1*q2 - p2*q1"),
            ],
        )
        .unwrap()
    }

    pub fn oscillator_pair() -> InvariantSet {
        let s = SymplecticStructure::canonical(2);
        InvariantSet::new(
            s,
            vec![
                ("E1".into(), parse("(p1^2 + q1^2)/2", 2).unwrap()),
                ("E2".into(), parse("(p2^2 + 4*q2^2)/2", 2).unwrap()),
            ],
        )
        .unwrap()
    }

    pub fn three_particles() -> InvariantSet {
        let s = SymplecticStructure::canonical(3);
        let m = |name: &str, text: &str| (name.to_string(), parse(text, 3).unwrap());
        InvariantSet::new(
            s,
            vec![
                m(
                    "H1",
                    "p1^2/2 + p2^2/2 + p3^2/2 + g/(q1-q2)^2 + g/(q1-q3)^2 + g/(q2-q3)^2",
                ),
                m("H2", "q1*p1 + q2*p2 + q3*p3"),
                m("H3", "p1 + p2 + p3"),
            ],
        )
        .unwrap()
        .with_params([("g".to_string(), 1.0)].into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn bracket_table_is_antisymmetric() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        let pts = inv.sample_points(&SeedStream::new(3), "t", 5).unwrap();
        let table = inv.bracket_table();
        for u in &pts {
            for i in 0..4 {
                for j in 0..4 {
                    let a = table[i][j].evaluate(u).unwrap();
                    let b = table[j][i].evaluate(u).unwrap();
                    assert!((a + b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(matches!(
            InvariantSet::new(SymplecticStructure::canonical(1), vec![]),
            Err(AlgebraError::Empty)
        ));
    }

    #[test]
    fn members_must_fit_the_phase_space() {
        let r = InvariantSet::new(
            SymplecticStructure::canonical(1),
            vec![("F".into(), Expr::q(2))],
        );
        assert!(matches!(r, Err(AlgebraError::Symplectic(_))));
    }
}
