//! Pointwise bracket matrices, Lie-algebra rank, level-set witnesses,
//! Cartan subalgebras at regular elements and the Mishchenko–Fomenko test.

use super::{AlgebraError, InvariantSet};
use crate::expr::EvalPoint;
use crate::linalg::{null_space, numeric_rank, RANK_RTOL};
use crate::sampling::SeedStream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Probes used to estimate the generic kernel dimension.
const REGULARITY_PROBES: usize = 8;

/// `M[i][j] = {H_i, H_j}(u)`, antisymmetric by construction.
pub fn bracket_matrix_at(inv: &InvariantSet, u: &EvalPoint) -> Result<DMatrix<f64>, AlgebraError> {
    Ok(scaled_bracket_matrix_at(inv, u)?.0)
}

/// The bracket matrix and the natural scale `max |∇H_i| |∇H_j|` of its
/// entries, below which values are indistinguishable from rounding.
pub(crate) fn scaled_bracket_matrix_at(
    inv: &InvariantSet,
    u: &EvalPoint,
) -> Result<(DMatrix<f64>, f64), AlgebraError> {
    let k = inv.k();
    let s = inv.structure();
    let grads: Vec<Vec<f64>> = inv
        .gradients()
        .iter()
        .map(|g| g.iter().map(|d| d.evaluate(u)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = s.bracket_from_gradients(&grads[i], &grads[j]);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    let norms: Vec<f64> = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let largest = norms.iter().fold(0.0f64, |a, b| a.max(*b));
    Ok((m, largest * largest))
}

/// Entries below this multiple of the natural scale are rounding noise.
const NOISE_FLOOR: f64 = 1e-12;

/// Numeric rank that treats a matrix lying entirely in the noise floor as zero.
pub(crate) fn bracket_rank(m: &DMatrix<f64>, scale: f64) -> usize {
    if m.amax() <= NOISE_FLOOR * scale {
        0
    } else {
        numeric_rank(m, RANK_RTOL)
    }
}

fn bracket_kernel(m: &DMatrix<f64>, scale: f64) -> Vec<DVector<f64>> {
    if m.amax() <= NOISE_FLOOR * scale {
        null_space(&DMatrix::zeros(m.nrows(), m.ncols()), RANK_RTOL)
    } else {
        null_space(m, RANK_RTOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub k: usize,
    /// Numeric rank of the bracket matrix at each usable probe.
    pub matrix_ranks: Vec<usize>,
    pub max_matrix_rank: usize,
    /// `rank G = k − max matrix rank`.
    pub rank: usize,
    pub constant_rank: bool,
    /// Probes dropped because a bracket was undefined there.
    pub skipped: usize,
}

pub fn algebra_rank(inv: &InvariantSet, probes: &[EvalPoint]) -> Result<RankReport, AlgebraError> {
    if probes.len() < 3 {
        return Err(AlgebraError::TooFewProbes {
            needed: 3,
            got: probes.len(),
        });
    }
    let mut ranks = Vec::new();
    let mut skipped = 0;
    for u in probes {
        match scaled_bracket_matrix_at(inv, u) {
            Ok((m, scale)) => ranks.push(bracket_rank(&m, scale)),
            Err(AlgebraError::Eval(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let Some(&max_rank) = ranks.iter().max() else {
        return Err(AlgebraError::AllProbesSingular);
    };
    Ok(RankReport {
        k: inv.k(),
        constant_rank: ranks.iter().all(|&r| r == max_rank),
        matrix_ranks: ranks,
        max_matrix_rank: max_rank,
        rank: inv.k() - max_rank,
        skipped,
    })
}

/// Values `h` of the invariants, optionally with a point on `M_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularElement {
    pub h: Vec<f64>,
    pub witness: Option<EvalPoint>,
}

impl RegularElement {
    pub fn new(h: Vec<f64>) -> Self {
        RegularElement { h, witness: None }
    }

    /// The element `h = H(u)` witnessed by `u` itself.
    pub fn at_point(inv: &InvariantSet, u: &EvalPoint) -> Result<Self, AlgebraError> {
        Ok(RegularElement {
            h: inv.values_at(u)?,
            witness: Some(u.clone()),
        })
    }

    /// Locate a witness on the level set starting from `guess`.
    pub fn locate(
        inv: &InvariantSet,
        h: Vec<f64>,
        guess: &EvalPoint,
        search: &LevelSearch,
    ) -> Result<Self, AlgebraError> {
        let witness = find_level_point(inv, &h, guess, search)?;
        Ok(RegularElement {
            h,
            witness: Some(witness),
        })
    }

    /// Largest `|H_j(u_h) − h_j|`, or `None` without a witness.
    pub fn witness_residual(&self, inv: &InvariantSet) -> Result<Option<f64>, AlgebraError> {
        let Some(u) = &self.witness else {
            return Ok(None);
        };
        let values = inv.values_at(u)?;
        Ok(Some(max_abs_diff(&values, &self.h)))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Options for [`find_level_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSearch {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for LevelSearch {
    fn default() -> Self {
        LevelSearch {
            tol: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Damped Gauss–Newton on `Σ (H_j(u) − h_j)²` with minimum-norm steps.
/// Converged when `max_j |H_j(u) − h_j| ≤ tol`.
pub fn find_level_point(
    inv: &InvariantSet,
    h: &[f64],
    guess: &EvalPoint,
    search: &LevelSearch,
) -> Result<EvalPoint, AlgebraError> {
    if h.len() != inv.k() {
        return Err(AlgebraError::TargetLength {
            expected: inv.k(),
            got: h.len(),
        });
    }
    let misfit = |u: &EvalPoint| -> Option<DVector<f64>> {
        let v = inv.values_at(u).ok()?;
        Some(DVector::from_iterator(v.len(), v.iter().zip(h).map(|(a, b)| a - b)))
    };
    let mut u = guess.clone();
    let start = inv.values_at(&u).map_err(AlgebraError::Eval)?;
    let mut f = DVector::from_iterator(start.len(), start.iter().zip(h).map(|(a, b)| a - b));
    let mut best = f.amax();
    for _ in 0..search.max_iterations {
        if best <= search.tol {
            return Ok(u);
        }
        let jac = match inv.jacobian_at(&u) {
            Ok(j) => j,
            Err(_) => break,
        };
        let svd = jac.svd(true, true);
        let largest = svd.singular_values.max();
        if largest == 0.0 {
            break;
        }
        let Ok(step) = svd.solve(&f, RANK_RTOL * largest) else {
            break;
        };
        let norm2 = f.norm_squared();
        let state = u.state();
        let mut improved = false;
        let mut alpha = 1.0;
        for _ in 0..40 {
            let trial_state: Vec<f64> = state.iter().zip(step.iter()).map(|(x, d)| x - alpha * d).collect();
            let mut trial = u.clone();
            trial.set_state(&trial_state);
            if let Some(tf) = misfit(&trial) {
                if tf.norm_squared() < norm2 {
                    u = trial;
                    f = tf;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        best = f.amax();
        if !improved {
            break;
        }
    }
    if best <= search.tol {
        return Ok(u);
    }
    Err(AlgebraError::NoConvergence {
        iterations: search.max_iterations,
        best_residual: best,
    })
}

/// Basis of the Cartan subalgebra `G_h` as coefficient vectors over the
/// members of the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanBasis {
    pub vectors: Vec<Vec<f64>>,
    /// Largest `|Σ_i c_i {H_i, H_j}(u_h)|` over basis vectors and `j`.
    pub residual: f64,
    /// Generic kernel dimension found while checking regularity.
    pub generic_dimension: usize,
}

impl CartanBasis {
    pub fn r(&self) -> usize {
        self.vectors.len()
    }

    /// Cartan elements as expressions.
    pub fn combinations(&self, inv: &InvariantSet) -> Vec<crate::expr::Expr> {
        self.vectors.iter().map(|c| inv.combination(c)).collect()
    }

    /// Relative distance from `v` to the span of the basis.
    pub fn distance_to_span(&self, v: &[f64]) -> f64 {
        let basis: Vec<DVector<f64>> = self
            .vectors
            .iter()
            .map(|c| DVector::from_column_slice(c))
            .collect();
        crate::linalg::relative_distance_to_span(&DVector::from_column_slice(v), &basis)
    }
}

/// Kernel of the bracket matrix at the witness of `h`, after checking that
/// its dimension is the generic one found on seeded probes.
pub fn cartan_basis_at(
    inv: &InvariantSet,
    h: &RegularElement,
    seeds: &SeedStream,
) -> Result<CartanBasis, AlgebraError> {
    let u = h.witness.as_ref().ok_or(AlgebraError::MissingWitness)?;
    let (m, scale) = scaled_bracket_matrix_at(inv, u)?;
    let kernel = bracket_kernel(&m, scale);

    let probes = inv.sample_points(seeds, "cartan_regularity", REGULARITY_PROBES)?;
    let generic = probes
        .iter()
        .map(|p| scaled_bracket_matrix_at(inv, p).map(|(m, scale)| inv.k() - bracket_rank(&m, scale)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .min()
        .unwrap_or(inv.k());
    if kernel.len() > generic {
        return Err(AlgebraError::NonRegular {
            witness: kernel.len(),
            generic,
        });
    }

    let mut residual = 0.0f64;
    for c in &kernel {
        residual = residual.max((m.transpose() * c).amax());
    }
    Ok(CartanBasis {
        vectors: kernel.iter().map(|c| c.iter().copied().collect()).collect(),
        residual,
        generic_dimension: generic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfReport {
    pub dim_g: usize,
    pub rank_g: usize,
    pub dim_m: usize,
    pub holds: bool,
    pub constant_rank: bool,
}

impl MfReport {
    /// Turn a failed check into an error.
    pub fn require(&self) -> Result<(), AlgebraError> {
        if self.holds {
            Ok(())
        } else {
            Err(AlgebraError::MishchenkoFomenko {
                lhs: self.dim_g + self.rank_g,
                dim_m: self.dim_m,
            })
        }
    }
}

/// `dim G + rank G = dim M`.
pub fn mishchenko_fomenko_check(
    inv: &InvariantSet,
    probes: &[EvalPoint],
) -> Result<MfReport, AlgebraError> {
    let report = algebra_rank(inv, probes)?;
    let dim_m = inv.structure().phase_dimension();
    Ok(MfReport {
        dim_g: inv.k(),
        rank_g: report.rank,
        dim_m,
        holds: inv.k() + report.rank == dim_m,
        constant_rank: report.constant_rank,
    })
}

/// True iff the Jacobian of the members has full rank `k` at every probe.
pub fn functional_independence(inv: &InvariantSet, probes: &[EvalPoint]) -> Result<bool, AlgebraError> {
    if probes.len() < inv.k() {
        return Err(AlgebraError::TooFewProbes {
            needed: inv.k(),
            got: probes.len(),
        });
    }
    for u in probes {
        let jac = inv.jacobian_at(u)?;
        if numeric_rank(&jac, RANK_RTOL) < inv.k() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::expr::parse;
    use crate::symplectic::SymplecticStructure;

    fn probes(inv: &InvariantSet, count: usize) -> Vec<EvalPoint> {
        inv.sample_points(&SeedStream::new(11), "probes", count).unwrap()
    }

    #[test]
    fn vortex_bracket_matrix_pattern() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        for u in probes(&inv, 5) {
            let m = bracket_matrix_at(&inv, &u).unwrap();
            let v = inv.values_at(&u).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let expected = match (i, j) {
                        (0, 2) => -v[1],
                        (2, 0) => v[1],
                        (1, 2) => v[0],
                        (2, 1) => -v[0],
                        _ => 0.0,
                    };
                    assert!((m[(i, j)] - expected).abs() < 1e-10, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn ranks() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        let r = algebra_rank(&inv, &probes(&inv, 6)).unwrap();
        assert_eq!((r.max_matrix_rank, r.rank, r.constant_rank), (2, 2, true));
        let inv = central_field_set();
        assert_eq!(algebra_rank(&inv, &probes(&inv, 6)).unwrap().rank, 2);
        let inv = oscillator_pair();
        let r = algebra_rank(&inv, &probes(&inv, 6)).unwrap();
        assert_eq!((r.max_matrix_rank, r.rank), (0, 2));
        assert!(matches!(
            algebra_rank(&inv, &probes(&inv, 2)),
            Err(AlgebraError::TooFewProbes { .. })
        ));
    }

    #[test]
    fn mf_scan_over_vortex_counts() {
        for n in 2..=5 {
            let mut xi: Vec<f64> = (1..n).map(|j| 0.5 + j as f64 * 0.3).collect();
            xi.push(-xi.iter().sum::<f64>());
            let inv = vortex_set(&xi);
            let report = mishchenko_fomenko_check(&inv, &probes(&inv, 6)).unwrap();
            assert_eq!(report.holds, n == 3, "n = {n}");
            assert_eq!(report.dim_g + report.rank_g, 6);
        }
        let inv = central_field_set();
        let report = mishchenko_fomenko_check(&inv, &probes(&inv, 6)).unwrap();
        assert!(report.holds);
        assert!(report.require().is_ok());
    }

    #[test]
    fn independence() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        assert!(functional_independence(&inv, &probes(&inv, 6)).unwrap());
        let s = SymplecticStructure::canonical(1);
        let h = parse("(p1^2 + q1^2)/2", 1).unwrap();
        let dep = InvariantSet::new(s.clone(), vec![("H".into(), h.clone()), ("2H".into(), 2.0 * h)]).unwrap();
        assert!(!functional_independence(&dep, &probes(&dep, 4)).unwrap());
        let qp = InvariantSet::new(s, vec![("q".into(), parse("q1", 1).unwrap()), ("p".into(), parse("p1", 1).unwrap())]).unwrap();
        assert!(functional_independence(&qp, &probes(&qp, 4)).unwrap());
    }

    #[test]
    fn level_point_on_the_oscillator_circle() {
        let s = SymplecticStructure::canonical(1);
        let inv = InvariantSet::new(s, vec![("H".into(), parse("(p1^2 + q1^2)/2", 1).unwrap())]).unwrap();
        let guess = EvalPoint::new(vec![1.0], vec![0.1]);
        let u = find_level_point(&inv, &[0.5], &guess, &LevelSearch::default()).unwrap();
        assert!((inv.values_at(&u).unwrap()[0] - 0.5).abs() <= 1e-10);
        match find_level_point(&inv, &[-1.0], &guess, &LevelSearch::default()) {
            Err(AlgebraError::NoConvergence { best_residual, .. }) => assert!(best_residual >= 1.0 - 1e-9),
            other => panic!("expected no convergence, got {other:?}"),
        }
        assert!(matches!(
            find_level_point(&inv, &[0.5, 1.0], &guess, &LevelSearch::default()),
            Err(AlgebraError::TargetLength { .. })
        ));
    }

    #[test]
    fn level_point_recovers_vortex_targets() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        let u0 = &probes(&inv, 1)[0];
        let h = inv.values_at(u0).unwrap();
        let mut guess = u0.clone();
        let state: Vec<f64> = guess.state().iter().enumerate().map(|(i, x)| x + 0.05 * (i as f64 - 2.5)).collect();
        guess.set_state(&state);
        let u = find_level_point(&inv, &h, &guess, &LevelSearch::default()).unwrap();
        let worst = max_abs_diff(&inv.values_at(&u).unwrap(), &h);
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn central_field_cartan() {
        let inv = central_field_set();
        let u = &probes(&inv, 1)[0];
        let h = RegularElement::at_point(&inv, u).unwrap();
        let cartan = cartan_basis_at(&inv, &h, &SeedStream::new(3)).unwrap();
        assert_eq!(cartan.r(), 2);
        assert!(cartan.residual <= 1e-8);
        assert!(cartan.distance_to_span(&[1.0, 0.0, 0.0, 0.0]) < 1e-8);
        assert!(cartan.distance_to_span(&[0.0, h.h[1], h.h[2], h.h[3]]) < 1e-8);
        assert!(cartan.distance_to_span(&[0.0, 1.0, 0.0, 0.0]) > 1e-3);
    }

    #[test]
    fn vortex_cartan_contains_h_and_q_h() {
        let xi = [1.0, 1.0, -2.0];
        let inv = vortex_set(&xi);
        let u = &probes(&inv, 1)[0];
        let h = RegularElement::at_point(&inv, u).unwrap();
        let cartan = cartan_basis_at(&inv, &h, &SeedStream::new(3)).unwrap();
        assert_eq!(cartan.r(), 2);
        assert!(cartan.distance_to_span(&[0.0, 0.0, 0.0, 1.0]) < 1e-8);
        let sum: f64 = xi.iter().sum();
        assert!(cartan.distance_to_span(&[-h.h[0], -h.h[1], sum, 0.0]) < 1e-8);
        // Cartan elements commute at the witness
        let combos = cartan.combinations(&inv);
        let s = inv.structure();
        let w = h.witness.as_ref().unwrap();
        for a in &combos {
            for b in &combos {
                assert!(s.bracket_value(a, b, w).unwrap().abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn abelian_cartan_is_everything() {
        let inv = oscillator_pair();
        let u = &probes(&inv, 1)[0];
        let h = RegularElement::at_point(&inv, u).unwrap();
        assert_eq!(cartan_basis_at(&inv, &h, &SeedStream::new(3)).unwrap().r(), 2);
        assert!(matches!(
            cartan_basis_at(&inv, &RegularElement::new(h.h.clone()), &SeedStream::new(3)),
            Err(AlgebraError::MissingWitness)
        ));
    }

    #[test]
    fn singular_witness_is_not_regular() {
        // P1 = P2 = 0 makes the bracket matrix vanish
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        let u = inv.point(vec![1.0, 0.6, 0.8], vec![0.4, 1.6, 1.0]);
        let h = RegularElement::at_point(&inv, &u).unwrap();
        assert!(h.h[0].abs() < 1e-12 && h.h[1].abs() < 1e-12);
        assert!(matches!(
            cartan_basis_at(&inv, &h, &SeedStream::new(3)),
            Err(AlgebraError::NonRegular { witness: 4, generic: 2 })
        ));
    }
}
