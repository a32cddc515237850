//! Polynomial completions commuting with a Cartan subalgebra, and pointwise
//! dual abelian combinations of the complementary invariants.

use super::rank::{bracket_matrix_at, CartanBasis, RegularElement};
use super::{AlgebraError, InvariantSet};
use crate::expr::{EvalPoint, Expr};
use crate::linalg::{null_space, numeric_rank, orthogonal_complement, orthonormal_basis, RANK_RTOL};
use crate::sampling::SeedStream;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Singular values of the projected kernel below this count as excluded.
const EXCLUSION_TOL: f64 = 1e-6;
/// Coefficients smaller than this fraction of the largest are dropped.
const COEFFICIENT_CUTOFF: f64 = 1e-9;
const VERIFY_TOL: f64 = 1e-8;
const VERIFY_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOptions {
    /// Total degree of the ansatz, 1 or 2.
    pub degree: usize,
    /// Members used as ansatz generators; all members when `None`.
    pub generators: Option<Vec<usize>>,
    pub samples: usize,
}

impl CompletionOptions {
    pub fn new(degree: usize) -> Self {
        CompletionOptions {
            degree,
            generators: None,
            samples: 24,
        }
    }

    pub fn with_generators(mut self, generators: Vec<usize>) -> Self {
        self.generators = Some(generators);
        self
    }
}

/// One solution `Σ a_m Π H_g^{e_mg}` of the commutation constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCandidate {
    pub generators: Vec<String>,
    /// Exponent vectors over the generators, one per monomial.
    pub monomials: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
    /// Readable form in the generator names.
    pub description: String,
    pub expr: Expr,
    /// Largest bracket with a Cartan element or generator at the
    /// verification points.
    pub max_bracket: f64,
}

impl CompletionCandidate {
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.monomials
            .iter()
            .zip(&self.coefficients)
            .map(|(m, c)| c * monomial_value(m, values))
            .sum()
    }
}

fn monomials_up_to(g: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(g: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == g {
            if prefix.iter().sum::<u32>() > 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(g, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(g, degree as u32, &mut Vec::new(), &mut out);
    out.sort_by_key(|m| m.iter().sum::<u32>());
    out
}

fn monomial_value(m: &[u32], values: &[f64]) -> f64 {
    m.iter()
        .zip(values)
        .map(|(&e, v)| v.powi(e as i32))
        .product()
}

/// `∂M/∂H_g` for the monomial `M`.
fn monomial_partial(m: &[u32], values: &[f64], g: usize) -> f64 {
    if m[g] == 0 {
        return 0.0;
    }
    let mut d = m[g] as f64;
    for (i, (&e, v)) in m.iter().zip(values).enumerate() {
        let e = if i == g { e - 1 } else { e };
        d *= v.powi(e as i32);
    }
    d
}

fn describe(names: &[String], monomials: &[Vec<u32>], coefficients: &[f64]) -> String {
    let mut out = String::new();
    for (m, &c) in monomials.iter().zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        let factors: Vec<String> = m
            .iter()
            .zip(names)
            .filter(|(e, _)| **e > 0)
            .map(|(e, n)| if *e == 1 { n.clone() } else { format!("{n}^{e}") })
            .collect();
        let body = factors.join("*");
        let magnitude = c.abs();
        let term = if (magnitude - 1.0).abs() < 1e-12 {
            body
        } else {
            format!("{magnitude}*{body}")
        };
        if out.is_empty() {
            out = if c < 0.0 { format!("-{term}") } else { term };
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
            out.push_str(&term);
        }
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

/// Search polynomials of degree `1..=d` in the generators that commute with
/// every Cartan element and every generator, modulo polynomials in the
/// Cartan elements. Returns an empty list when nothing new exists.
pub fn search_polynomial_completion(
    inv: &InvariantSet,
    cartan: &CartanBasis,
    options: &CompletionOptions,
    seeds: &SeedStream,
) -> Result<Vec<CompletionCandidate>, AlgebraError> {
    if !(1..=2).contains(&options.degree) {
        return Err(AlgebraError::UnsupportedDegree(options.degree));
    }
    let k = inv.k();
    let generators: Vec<usize> = match &options.generators {
        Some(g) => {
            if let Some(&bad) = g.iter().find(|&&i| i >= k) {
                return Err(AlgebraError::GeneratorIndex(bad));
            }
            g.clone()
        }
        None => (0..k).collect(),
    };
    let names: Vec<String> = generators.iter().map(|&i| inv.names()[i].clone()).collect();
    let monomials = monomials_up_to(generators.len(), options.degree);
    let m = monomials.len();

    // each constraint is a coefficient vector over the members
    let mut constraints: Vec<Vec<f64>> = cartan.vectors.clone();
    for &g in &generators {
        let mut e = vec![0.0; k];
        e[g] = 1.0;
        constraints.push(e);
    }

    let points = inv.sample_points(seeds, "completion", options.samples.max(4))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut value_rows: Vec<Vec<f64>> = Vec::new();
    let mut excluded_rows: Vec<Vec<f64>> = Vec::new();
    for u in &points {
        let all = inv.values_at(u)?;
        let vals: Vec<f64> = generators.iter().map(|&g| all[g]).collect();
        let mat = bracket_matrix_at(inv, u)?;
        for a in &constraints {
            // {H_g, A}(u) for every generator g
            let ga: Vec<f64> = generators
                .iter()
                .map(|&g| (0..k).map(|i| a[i] * mat[(g, i)]).sum())
                .collect();
            rows.push(
                monomials
                    .iter()
                    .map(|mono| {
                        (0..generators.len())
                            .map(|g| monomial_partial(mono, &vals, g) * ga[g])
                            .sum()
                    })
                    .collect(),
            );
        }
        value_rows.push(monomials.iter().map(|mono| monomial_value(mono, &vals)).collect());
        excluded_rows.push(excluded_values(cartan, &all, options.degree));
    }

    let a = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let scales: Vec<f64> = (0..m)
        .map(|j| {
            let n = a.column(j).norm().max(DMatrix::from_fn(value_rows.len(), 1, |i, _| value_rows[i][j]).norm());
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let kernel = null_space(&scaled, RANK_RTOL);
    if kernel.is_empty() {
        return Ok(Vec::new());
    }

    // function values of kernel directions, projected off the excluded span
    let values = DMatrix::from_fn(value_rows.len(), m, |i, j| value_rows[i][j] / scales[j]);
    let excluded: Vec<DVector<f64>> = {
        let e = DMatrix::from_fn(excluded_rows.len(), excluded_rows[0].len(), |i, j| excluded_rows[i][j]);
        let cols: Vec<DVector<f64>> = e
            .column_iter()
            .map(|c| {
                let n = c.norm();
                if n > 0.0 {
                    c / n
                } else {
                    c.clone_owned()
                }
            })
            .collect();
        orthonormal_basis(&cols, RANK_RTOL)
    };
    let kmat = DMatrix::from_columns(&kernel);
    let mut fvals = &values * &kmat;
    let col_norms: Vec<f64> = fvals.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
    for (j, n) in col_norms.iter().enumerate() {
        fvals.column_mut(j).scale_mut(1.0 / n);
    }
    for mut col in fvals.column_iter_mut() {
        let mut r = col.clone_owned();
        for b in &excluded {
            r -= b * b.dot(&r);
        }
        col.copy_from(&r);
    }
    let svd = fvals.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    // kernel directions whose functions lie in the excluded span
    let mut inside: Vec<DVector<f64>> = Vec::new();
    let mut fresh = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= EXCLUSION_TOL {
            let y = DVector::from_fn(kernel.len(), |j, _| v_t[(i, j)] / col_norms[j]);
            inside.push(&kmat * y);
        } else {
            fresh += 1;
        }
    }
    if fresh == 0 {
        return Ok(Vec::new());
    }
    let inside = orthonormal_basis(&inside, RANK_RTOL);
    let mut reduced: Vec<DVector<f64>> = kernel
        .iter()
        .map(|c| {
            let mut r = c.clone();
            for b in &inside {
                r -= b * b.dot(c);
            }
            r
        })
        .collect();
    reduced = orthonormal_basis(&reduced, 1e-6);
    reduced.truncate(fresh);

    let check_points = inv.sample_points(seeds, "completion_verify", VERIFY_POINTS)?;
    let constraint_exprs: Vec<Expr> = constraints.iter().map(|c| inv.combination(c)).collect();
    let mut accepted: Vec<CompletionCandidate> = Vec::new();
    for dir in reduced {
        let mut coefficients: Vec<f64> = dir.iter().zip(&scales).map(|(c, s)| c / s).collect();
        let largest = coefficients.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let lead = coefficients
            .iter()
            .copied()
            .find(|c| c.abs() > COEFFICIENT_CUTOFF * largest)
            .unwrap_or(1.0);
        let norm = largest * lead.signum();
        for c in &mut coefficients {
            *c /= norm;
            if (*c - c.round()).abs() < COEFFICIENT_CUTOFF {
                *c = c.round();
            }
        }
        let expr = Expr::sum(
            monomials
                .iter()
                .zip(&coefficients)
                .filter(|(_, c)| **c != 0.0)
                .map(|(mono, &c)| {
                    c * Expr::product(mono.iter().zip(&generators).filter(|(e, _)| **e > 0).map(
                        |(&e, &g)| {
                            let base = inv.members()[g].clone();
                            if e == 1 {
                                base
                            } else {
                                base.powi(e as i32)
                            }
                        },
                    ))
                }),
        );
        let mut all_targets = constraint_exprs.clone();
        all_targets.extend(accepted.iter().map(|c| c.expr.clone()));
        let max_bracket = max_bracket_at(inv, &expr, &all_targets, &check_points)?;
        if max_bracket.0 > VERIFY_TOL * max_bracket.1 {
            continue;
        }
        accepted.push(CompletionCandidate {
            generators: names.clone(),
            description: describe(&names, &monomials, &coefficients),
            monomials: monomials.clone(),
            coefficients,
            expr,
            max_bracket: max_bracket.0,
        });
    }
    Ok(accepted)
}

/// Values at one point of constants, Cartan elements and their products up
/// to `degree`.
fn excluded_values(cartan: &CartanBasis, all: &[f64], degree: usize) -> Vec<f64> {
    let linear: Vec<f64> = cartan
        .vectors
        .iter()
        .map(|c| c.iter().zip(all).map(|(a, b)| a * b).sum())
        .collect();
    let mut out = vec![1.0];
    out.extend(
        monomials_up_to(linear.len(), degree)
            .iter()
            .map(|mono| monomial_value(mono, &linear)),
    );
    out
}

/// Largest `|{f, g}|` over targets and points, and the scale `1 + |∇f||∇g|`
/// it should be compared against.
fn max_bracket_at(
    inv: &InvariantSet,
    f: &Expr,
    targets: &[Expr],
    points: &[EvalPoint],
) -> Result<(f64, f64), AlgebraError> {
    let n = inv.n();
    let s = inv.structure();
    let grad_f = f.gradient(n);
    let grad_t: Vec<Vec<Expr>> = targets.iter().map(|t| t.gradient(n)).collect();
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for u in points {
        let df: Vec<f64> = grad_f.iter().map(|d| d.evaluate(u)).collect::<Result<_, _>>()?;
        let nf = df.iter().map(|x| x * x).sum::<f64>().sqrt();
        for gt in &grad_t {
            let dg: Vec<f64> = gt.iter().map(|d| d.evaluate(u)).collect::<Result<_, _>>()?;
            let ng = dg.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(s.bracket_from_gradients(&df, &dg).abs());
            scale = scale.max(1.0 + nf * ng);
        }
    }
    Ok((worst, scale))
}

/// Pointwise isotropic combinations of the complement of the Cartan span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAbelian {
    /// Orthonormal complement of the Cartan span in `R^k`.
    pub complement: Vec<Vec<f64>>,
    /// `c_{·s}` over the complement basis, `n − r` of them.
    pub coefficients: Vec<Vec<f64>>,
    /// The same combinations expressed over the members.
    pub member_coefficients: Vec<Vec<f64>>,
    /// Largest pairwise bracket at the witness.
    pub max_bracket: f64,
}

/// Choose `n − r` combinations of the complementary invariants that are in
/// involution at the witness of `h`.
pub fn dual_abelian_pointwise(
    inv: &InvariantSet,
    cartan: &CartanBasis,
    h: &RegularElement,
) -> Result<DualAbelian, AlgebraError> {
    let u = h.witness.as_ref().ok_or(AlgebraError::MissingWitness)?;
    let k = inv.k();
    let n = inv.n();
    let r = cartan.r();
    if r > n || k - r != 2 * (n - r) {
        return Err(AlgebraError::MishchenkoFomenko {
            lhs: k + r,
            dim_m: 2 * n,
        });
    }
    let target = n - r;
    let m = bracket_matrix_at(inv, u)?;
    let cartan_vecs: Vec<DVector<f64>> = cartan
        .vectors
        .iter()
        .map(|c| DVector::from_column_slice(c))
        .collect();
    let w_cols = orthogonal_complement(&cartan_vecs, k, RANK_RTOL);
    if w_cols.len() != k - r {
        return Err(AlgebraError::DegenerateComplement);
    }
    if w_cols.is_empty() {
        return Ok(DualAbelian {
            complement: Vec::new(),
            coefficients: Vec::new(),
            member_coefficients: Vec::new(),
            max_bracket: 0.0,
        });
    }
    let w = DMatrix::from_columns(&w_cols);
    let b = w.transpose() * &m * &w;
    let dim = b.nrows();
    if numeric_rank(&b, RANK_RTOL) < dim || b.amax() == 0.0 {
        return Err(AlgebraError::DegenerateComplement);
    }

    let eigen = SymmetricEigen::new(b.transpose() * &b);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
    let mut candidates: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| eigen.eigenvectors.column(i).clone_owned())
        .collect();
    candidates.extend((0..dim).map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 })));

    let mut chosen: Vec<DVector<f64>> = Vec::new();
    for x in candidates {
        if chosen.len() == target {
            break;
        }
        let mut span: Vec<DVector<f64>> = chosen.clone();
        span.extend(chosen.iter().map(|c| &b * c));
        let span = orthonormal_basis(&span, RANK_RTOL);
        let mut rem = x.clone();
        for s in &span {
            rem -= s * s.dot(&x);
        }
        if rem.norm() > 1e-6 {
            chosen.push(rem.normalize());
        }
    }
    if chosen.len() != target {
        return Err(AlgebraError::DegenerateComplement);
    }

    let mut max_bracket = 0.0f64;
    for a in &chosen {
        for c in &chosen {
            max_bracket = max_bracket.max((a.transpose() * &b * c)[(0, 0)].abs());
        }
    }
    let to_vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
    Ok(DualAbelian {
        complement: w_cols.iter().map(to_vec).collect(),
        member_coefficients: chosen.iter().map(|c| to_vec(&(&w * c))).collect(),
        coefficients: chosen.iter().map(to_vec).collect(),
        max_bracket,
    })
}
