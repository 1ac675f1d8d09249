//! Small dense-matrix helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest absolute entry of `m - m^T`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`. Empty matrices report 0.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.max()
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square() && Cholesky::new(m.clone()).is_some()
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn mat_inf_norm(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// ½ zᵀ M z.
pub fn half_quadratic(m: &Matrix, z: &Vector) -> f64 {
    0.5 * z.dot(&(m * z))
}

/// Stack `[top; bottom]`.
pub fn vstack(top: &Vector, bottom: &Vector) -> Vector {
    let mut out = Vector::zeros(top.len() + bottom.len());
    out.rows_mut(0, top.len()).copy_from(top);
    out.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    out
}
