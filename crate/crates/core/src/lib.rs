//! Lie-algebraic integrability analysis for Hamiltonian systems on `T*R^n`.
//!
//! The crate decides whether a finite set of invariants closes into a Lie
//! algebra under the Poisson bracket, computes its rank and Cartan
//! subalgebra, checks the Mishchenko–Fomenko dimension condition, searches
//! for commuting completions, integrates the flows, and evaluates action
//! variables, times and frequencies for separable systems.

pub mod action_angle;
pub mod algebra;
pub mod catalog;
pub mod expr;
pub mod flows;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod symplectic;
pub mod sysfile;
pub mod verification;

pub use algebra::{AlgebraError, InvariantSet, StructureConstants};
pub use expr::{parse, EvalPoint, Expr, Func, Var, VarKind};
pub use sampling::SeedStream;
pub use symplectic::{SymplecticStructure, VectorFieldExpr};
