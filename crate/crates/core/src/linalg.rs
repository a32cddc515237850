//! Small dense linear-algebra helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_RTOL: f64 = 1e-8;

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rtol * largest`.
pub fn numeric_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&largest) if largest > 0.0 => s.iter().filter(|&&x| x > rtol * largest).count(),
        _ => 0,
    }
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the right null space of `m`, from the right
/// singular vectors whose singular values are at most `rtol * largest`.
/// A zero matrix has the whole space as kernel.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> Vec<DVector<f64>> {
    let ncols = m.ncols();
    if ncols == 0 {
        return Vec::new();
    }
    // pad with zero rows so the SVD returns a full set of right vectors
    let padded = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let largest = svd.singular_values.max();
    let mut kernel = Vec::new();
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if largest == 0.0 || sigma <= rtol * largest {
            kernel.push(v_t.row(i).transpose());
        }
    }
    kernel
}

/// Orthonormal basis of the span of the given vectors.
pub fn orthonormal_basis(vectors: &[DVector<f64>], rtol: f64) -> Vec<DVector<f64>> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let m = DMatrix::from_columns(vectors);
    if m.iter().all(|x| *x == 0.0) {
        return Vec::new();
    }
    let dim = first.len();
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let largest = svd.singular_values.max();
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rtol * largest)
        .map(|(i, _)| u.column(i).clone_owned())
        .filter(|c| c.len() == dim)
        .collect()
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in `R^dim`.
pub fn orthogonal_complement(basis: &[DVector<f64>], dim: usize, rtol: f64) -> Vec<DVector<f64>> {
    if basis.is_empty() {
        return (0..dim).map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    let rows = DMatrix::from_rows(&basis.iter().map(|b| b.transpose()).collect::<Vec<_>>());
    null_space(&rows, rtol)
}

/// Minimum-norm least-squares solution of `a x ≈ b` and the numeric rank of
/// `a` that was used.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> (DVector<f64>, usize) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0);
    }
    let rank = numeric_rank(a, rtol);
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let eps = if largest > 0.0 { rtol * largest } else { f64::MIN_POSITIVE };
    let x = svd
        .solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    (x, rank)
}

/// Squared distance from `v` to `span(basis)` where `basis` is orthonormal,
/// relative to `|v|^2`.
pub fn relative_distance_to_span(v: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    let mut residual = v.clone();
    for b in basis {
        residual -= b * b.dot(v);
    }
    let norm = v.norm();
    if norm == 0.0 {
        0.0
    } else {
        residual.norm() / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel() {
        let m = matrix_from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        assert_eq!(numeric_rank(&m, RANK_RTOL), 1);
        let kernel = null_space(&m, RANK_RTOL);
        assert_eq!(kernel.len(), 2);
        for k in &kernel {
            assert!((&m * k).norm() < 1e-12);
            assert!((k.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let m = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(null_space(&m, RANK_RTOL).len(), 3);
        assert_eq!(numeric_rank(&m, RANK_RTOL), 0);
    }

    #[test]
    fn least_squares_recovers_coefficients() {
        let a = matrix_from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let (x, rank) = least_squares(&a, &b, RANK_RTOL);
        assert_eq!(rank, 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complement_and_span_distance() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let comp = orthogonal_complement(&[e1.clone()], 3, RANK_RTOL);
        assert_eq!(comp.len(), 2);
        for c in &comp {
            assert!(c.dot(&e1).abs() < 1e-12);
        }
        let v = DVector::from_vec(vec![3.0, 0.0, 0.0]);
        assert!(relative_distance_to_span(&v, &[e1]) < 1e-15);
    }
}
