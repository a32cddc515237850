use super::{EvalPoint, Expr};
use crate::sampling::{sample_coordinate, sample_point, SeedStream};
use std::collections::BTreeMap;
use thiserror::Error;

/// Seed used by [`numerically_equivalent`].
pub const EQUIVALENCE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivalenceError {
    #[error("indeterminate: all {attempts} sample points hit domain errors")]
    Indeterminate { attempts: usize },
}

/// True iff `|a(u) - b(u)| <= tol * (1 + |a(u)|)` at `samples` points whose
/// coordinates and parameters are drawn uniformly from
/// `[-2, -0.5] ∪ [0.5, 2]` with a fixed seed. Points where either side is
/// undefined are skipped (up to 10x oversampling).
pub fn numerically_equivalent(
    a: &Expr,
    b: &Expr,
    samples: usize,
    tol: f64,
) -> Result<bool, EquivalenceError> {
    numerically_equivalent_seeded(a, b, samples, tol, EQUIVALENCE_SEED)
}

pub fn numerically_equivalent_seeded(
    a: &Expr,
    b: &Expr,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<bool, EquivalenceError> {
    let n = a.max_index().max(b.max_index()).max(1);
    let names: Vec<String> = a.parameters().union(&b.parameters()).cloned().collect();
    let mut rng = SeedStream::new(seed).rng("numerically_equivalent");
    let max_attempts = 10 * samples.max(1);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples && attempts < max_attempts {
        attempts += 1;
        let params: BTreeMap<String, f64> = names
            .iter()
            .map(|name| (name.clone(), sample_coordinate(&mut rng)))
            .collect();
        let u: EvalPoint = sample_point(&mut rng, n, &params);
        let (Ok(x), Ok(y)) = (a.evaluate(&u), b.evaluate(&u)) else {
            continue;
        };
        accepted += 1;
        if (x - y).abs() > tol * (1.0 + x.abs()) {
            return Ok(false);
        }
    }
    if accepted == 0 {
        return Err(EquivalenceError::Indeterminate { attempts });
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn algebraic_identity() {
        let a = parse("(q1+p1)^2", 1).unwrap();
        let b = parse("q1^2 + 2*q1*p1 + p1^2", 1).unwrap();
        assert_eq!(numerically_equivalent(&a, &b, 50, 1e-12), Ok(true));
    }

    #[test]
    fn different_functions() {
        let a = parse("q1", 1).unwrap();
        let b = parse("p1", 1).unwrap();
        assert_eq!(numerically_equivalent(&a, &b, 50, 1e-12), Ok(false));
    }

    #[test]
    fn parameters_are_sampled() {
        let a = parse("g*(q1 + 1)", 1).unwrap();
        let b = parse("g*q1 + g", 1).unwrap();
        assert_eq!(numerically_equivalent(&a, &b, 20, 1e-12), Ok(true));
    }

    #[test]
    fn nowhere_defined_is_indeterminate() {
        let a = parse("ln(-q1^2 - 1)", 1).unwrap();
        assert!(matches!(
            numerically_equivalent(&a, &a, 5, 1e-12),
            Err(EquivalenceError::Indeterminate { attempts: 50 })
        ));
    }
}
