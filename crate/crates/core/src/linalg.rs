//! Thin helpers over nalgebra's dense matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky(a: Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or_else(|| Error::NumericalDegeneracy(format!("{what} is not positive definite")))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_spectral_norm(a: Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `max_i |v_i|`, with 1 for empty vectors so it can scale tolerances.
pub fn max_abs_or_one(v: &[f64]) -> f64 {
    v.iter().fold(1.0f64, |acc, x| acc.max(x.abs()))
}
