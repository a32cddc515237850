//! Structure constants by regression, closure, and solvability.

use super::{AlgebraError, InvariantSet};
use crate::linalg::{least_squares, RANK_RTOL};
use crate::sampling::SeedStream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Fitted constants of `{H_i, H_j} = c0[i][j] + Σ_s c[s][i][j] H_s`
/// (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    pub k: usize,
    pub c: Vec<Vec<Vec<f64>>>,
    pub c0: Vec<Vec<f64>>,
    /// Max over pairs and samples of `|misfit| / (1 + |{H_i,H_j}(u)|)`.
    pub residual: f64,
    pub allow_central: bool,
    /// The regression design was rank deficient on the samples.
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
}

impl StructureConstants {
    /// Constants of the zero (abelian) algebra of dimension `k`.
    pub fn abelian(k: usize) -> Self {
        StructureConstants {
            k,
            c: vec![vec![vec![0.0; k]; k]; k],
            c0: vec![vec![0.0; k]; k],
            residual: 0.0,
            allow_central: false,
            rank_deficient: false,
            warnings: Vec::new(),
        }
    }

    /// Build from explicit relations `(i, j, [(s, value)])` meaning
    /// `[e_i, e_j] = Σ value e_s`; antisymmetric partners are filled in.
    pub fn from_relations(k: usize, relations: &[(usize, usize, Vec<(usize, f64)>)]) -> Self {
        let mut sc = StructureConstants::abelian(k);
        for (i, j, terms) in relations {
            for &(s, v) in terms {
                sc.c[s][*i][*j] = v;
                sc.c[s][*j][*i] = -v;
            }
        }
        sc
    }

    /// Bracket of two elements given by coefficient vectors.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k];
        for i in 0..k {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                if y[j] == 0.0 {
                    continue;
                }
                let w = x[i] * y[j];
                for (s, o) in out.iter_mut().enumerate() {
                    *o += w * self.c[s][i][j];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn has_central_terms(&self, tol: f64) -> bool {
        self.c0.iter().flatten().any(|x| x.abs() > tol)
    }

    /// Largest component of the Jacobi sum
    /// `[[e_i,e_j],e_l] + [[e_j,e_l],e_i] + [[e_l,e_i],e_j]` over all triples.
    pub fn jacobi_defect(&self) -> f64 {
        let k = self.k;
        let basis = |i: usize| {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            e
        };
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let a = self.bracket(&self.bracket(&basis(i), &basis(j)), &basis(l));
                    let b = self.bracket(&self.bracket(&basis(j), &basis(l)), &basis(i));
                    let c = self.bracket(&self.bracket(&basis(l), &basis(i)), &basis(j));
                    for s in 0..k {
                        worst = worst.max((a[s] + b[s] + c[s]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Least-squares fit of the bracket table against the members (plus a
/// constant column when `allow_central`) over `samples` seeded points.
pub fn fit_structure_constants(
    inv: &InvariantSet,
    samples: usize,
    allow_central: bool,
    seeds: &SeedStream,
) -> Result<StructureConstants, AlgebraError> {
    let k = inv.k();
    let mut sc = StructureConstants::abelian(k);
    sc.allow_central = allow_central;
    if k < 2 {
        return Ok(sc);
    }
    let points = inv.sample_points(seeds, "fit_structure_constants", samples.max(1))?;
    let table = inv.bracket_table();
    let offset = usize::from(allow_central);
    let ncols = k + offset;

    let mut design = DMatrix::zeros(points.len(), ncols);
    for (l, u) in points.iter().enumerate() {
        if allow_central {
            design[(l, 0)] = 1.0;
        }
        for (s, v) in inv.values_at(u)?.into_iter().enumerate() {
            design[(l, s + offset)] = v;
        }
    }
    // unit-norm columns so differently scaled invariants are treated alike
    let scales: Vec<f64> = (0..ncols)
        .map(|c| {
            let norm = design.column(c).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = design.clone();
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / s);
    }

    let mut worst = 0.0f64;
    let mut deficient = false;
    for i in 0..k {
        for j in (i + 1)..k {
            let y = DVector::from_iterator(
                points.len(),
                points
                    .iter()
                    .map(|u| table[i][j].evaluate(u))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            let (x, rank) = least_squares(&scaled, &y, RANK_RTOL);
            deficient |= rank < ncols;
            let coef: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
            let fitted = &design * DVector::from_vec(coef.clone());
            for l in 0..points.len() {
                worst = worst.max((y[l] - fitted[l]).abs() / (1.0 + y[l].abs()));
            }
            if allow_central {
                sc.c0[i][j] = coef[0];
                sc.c0[j][i] = -coef[0];
            }
            for s in 0..k {
                sc.c[s][i][j] = coef[s + offset];
                sc.c[s][j][i] = -coef[s + offset];
            }
        }
    }
    sc.residual = worst;
    sc.rank_deficient = deficient;
    if deficient {
        sc.warnings.push(
            "regression design is rank deficient: invariants look functionally dependent on the samples"
                .into(),
        );
    }
    Ok(sc)
}

/// Closure holds when the fit residual is within `tol`, with central terms
/// only where they were permitted.
pub fn check_closure(sc: &StructureConstants, tol: f64) -> bool {
    sc.residual <= tol && (sc.allow_central || !sc.has_central_terms(0.0))
}

/// Derived series of the abstract algebra defined by `c` (central terms
/// ignored); solvable iff it reaches zero.
pub fn is_solvable(sc: &StructureConstants) -> bool {
    derived_series_dimensions(sc).last() == Some(&0)
}

/// Dimensions of `G ⊇ [G,G] ⊇ ...` until it reaches zero or stabilises.
pub fn derived_series_dimensions(sc: &StructureConstants) -> Vec<usize> {
    let k = sc.k;
    let zero_tol = 1e-8 * sc.max_abs().max(1.0);
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut dims = vec![k];
    while !basis.is_empty() {
        let mut brackets = Vec::new();
        for a in 0..basis.len() {
            for b in (a + 1)..basis.len() {
                brackets.push(DVector::from_vec(sc.bracket(&basis[a], &basis[b])));
            }
        }
        let next = span_basis(&brackets, zero_tol);
        let done = next.len() == basis.len();
        dims.push(next.len());
        basis = next;
        if done {
            break;
        }
    }
    dims
}

/// Orthonormal basis of the span, dropping directions whose singular value
/// is at most `zero_tol` in absolute terms.
fn span_basis(vectors: &[DVector<f64>], zero_tol: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_columns(vectors);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > zero_tol)
        .map(|(i, _)| u.column(i).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::expr::parse;
    use crate::symplectic::SymplecticStructure;

    #[test]
    fn vortex_algebra_closes_without_central_terms() {
        let inv = vortex_set(&[1.0, 1.0, -2.0]);
        let sc = fit_structure_constants(&inv, 24, false, &SeedStream::new(1)).unwrap();
        assert!(sc.residual < 1e-9, "{}", sc.residual);
        assert!(check_closure(&sc, 1e-6));
        // {P1, P} = -P2: c[P2][P1][P] = -1
        assert!((sc.c[1][0][2] + 1.0).abs() < 1e-9);
        // {P2, P} = P1
        assert!((sc.c[0][1][2] - 1.0).abs() < 1e-9);
        // derived algebra span{P1, P2} is abelian
        assert!(is_solvable(&sc));
        assert_eq!(derived_series_dimensions(&sc), vec![4, 2, 0]);
        assert!(sc.jacobi_defect() < 1e-8);
    }

    #[test]
    fn vortex_central_term() {
        let inv = vortex_set(&[1.0, 1.0, 1.0]);
        let sc = fit_structure_constants(&inv, 24, true, &SeedStream::new(1)).unwrap();
        assert!(sc.residual < 1e-9);
        assert!((sc.c0[0][1] + 3.0).abs() < 1e-9, "{}", sc.c0[0][1]);
        assert!(check_closure(&sc, 1e-6));
        // without the constant column the fit cannot absorb {P1,P2} = -3
        let sc = fit_structure_constants(&inv, 24, false, &SeedStream::new(1)).unwrap();
        assert!(!check_closure(&sc, 1e-6));
    }

    #[test]
    fn central_field_is_so3_plus_r() {
        let inv = central_field_set();
        let sc = fit_structure_constants(&inv, 24, false, &SeedStream::new(2)).unwrap();
        assert!(sc.residual < 1e-9);
        // {P1, P2} = P3 with members ordered (H, P1, P2, P3)
        assert!((sc.c[3][1][2] - 1.0).abs() < 1e-9);
        assert!(!is_solvable(&sc));
    }

    #[test]
    fn non_closing_pair() {
        let s = SymplecticStructure::canonical(1);
        let inv = InvariantSet::new(
            s,
            vec![
                ("H1".into(), parse("q1^2", 1).unwrap()),
                ("H2".into(), parse("p1^3", 1).unwrap()),
            ],
        )
        .unwrap();
        let sc = fit_structure_constants(&inv, 24, false, &SeedStream::new(5)).unwrap();
        assert!(!check_closure(&sc, 1e-6), "residual {}", sc.residual);
    }

    #[test]
    fn singleton_closes_trivially() {
        let s = SymplecticStructure::canonical(1);
        let inv = InvariantSet::new(s, vec![("H".into(), parse("q1*p1", 1).unwrap())]).unwrap();
        let sc = fit_structure_constants(&inv, 10, false, &SeedStream::new(5)).unwrap();
        assert!(check_closure(&sc, 1e-6));
        assert!(is_solvable(&sc));
    }

    #[test]
    fn three_particle_algebra_is_solvable() {
        let inv = three_particles();
        let sc = fit_structure_constants(&inv, 30, false, &SeedStream::new(9)).unwrap();
        assert!(sc.residual < 1e-8, "{}", sc.residual);
        // {H1, H2} = 2 H1, {H2, H3} = -H3, {H1, H3} = 0
        assert!((sc.c[0][0][1] - 2.0).abs() < 1e-8);
        assert!((sc.c[2][1][2] + 1.0).abs() < 1e-8);
        assert!(sc.c.iter().all(|m| m[0][2].abs() < 1e-8));
        assert!(is_solvable(&sc));
    }

    #[test]
    fn abstract_examples() {
        // so(3)
        let so3 = StructureConstants::from_relations(
            3,
            &[(0, 1, vec![(2, 1.0)]), (1, 2, vec![(0, 1.0)]), (2, 0, vec![(1, 1.0)])],
        );
        assert!(!is_solvable(&so3));
        assert_eq!(derived_series_dimensions(&so3), vec![3, 3]);
        assert!(so3.jacobi_defect() < 1e-15);
        // relations of the three-particle example with the signs as printed
        let ex = StructureConstants::from_relations(
            3,
            &[(0, 1, vec![(0, 2.0)]), (1, 2, vec![(2, 1.0)])],
        );
        assert!(is_solvable(&ex));
        assert_eq!(derived_series_dimensions(&ex), vec![3, 2, 0]);
        assert!(is_solvable(&StructureConstants::abelian(4)));
    }

    #[test]
    fn dependent_invariants_are_flagged() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("(p1^2 + q1^2)/2", 1).unwrap();
        let inv = InvariantSet::new(s, vec![("H".into(), h.clone()), ("2H".into(), 2.0 * h)]).unwrap();
        let sc = fit_structure_constants(&inv, 10, false, &SeedStream::new(5)).unwrap();
        assert!(sc.rank_deficient);
        assert!(!sc.warnings.is_empty());
        assert!(check_closure(&sc, 1e-9));
    }
}
