//! Small symmetric-matrix helpers shared by the solver modules.

use nalgebra::SymmetricEigen;

use crate::Matrix;

/// Eigenvalues above this (and below zero) are rounding noise and get clamped.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part; `+inf` for an empty matrix.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest absolute eigenvalue of the symmetric part.
pub fn min_abs_eigenvalue(m: &Matrix) -> f64 {
    eigenvalues(m).iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

fn eigenvalues(m: &Matrix) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        _ => SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect(),
    }
}

/// Symmetrizes a covariance, clamps eigenvalues in `(-1e-10, 0)` to zero and
/// normalizes negative zeros so equal covariances compare equal bytewise.
pub fn clean_covariance(m: &Matrix) -> Matrix {
    let mut s = symmetrize(m);
    if s.nrows() == 1 {
        let v = s[(0, 0)];
        if v < 0.0 && v > -PSD_TOLERANCE {
            s[(0, 0)] = 0.0;
        }
    } else if s.nrows() > 1 {
        let eig = SymmetricEigen::new(s.clone());
        let lo = eig.eigenvalues.min();
        if lo < 0.0 && lo > -PSD_TOLERANCE {
            let clamped = eig.eigenvalues.map(|v| v.max(0.0));
            s = symmetrize(
                &(&eig.eigenvectors * Matrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()),
            );
        }
    }
    s.apply(|v| *v += 0.0);
    s
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Max absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exact bit pattern of a matrix, usable as a hash key.
pub fn bit_key(m: &Matrix) -> Vec<u64> {
    m.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// A square root factor `F` with `F F' = cov` for a symmetric PSD matrix,
/// computed by eigendecomposition so singular covariances are allowed.
pub fn psd_sqrt(cov: &Matrix) -> Matrix {
    let n = cov.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(cov));
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

pub fn is_square(m: &Matrix) -> bool {
    m.nrows() == m.ncols()
}

/// Row-major nested vectors, the layout used by config and JSON files.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
