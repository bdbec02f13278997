use nalgebra::{DMatrix, DVector};

use crate::error::{MvmfError, Result};
use crate::scalar::Real;

/// Solves `a x = b` for a symmetric system matrix.
///
/// Tries a Cholesky factorization first and falls back to partially pivoted LU
/// when `a` is not numerically positive definite.
pub fn solve_symmetric<T: Real>(a: &DMatrix<T>, b: &DVector<T>, what: &'static str) -> Result<DVector<T>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(MvmfError::Dimension(format!(
            "{what}: system {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(MvmfError::Singular(what))
}

/// Inverse of a symmetric matrix, same strategy as [`solve_symmetric`].
pub fn inverse_symmetric<T: Real>(a: &DMatrix<T>, what: &'static str) -> Result<DMatrix<T>> {
    if a.nrows() != a.ncols() {
        return Err(MvmfError::Dimension(format!("{what}: non-square {}x{}", a.nrows(), a.ncols())));
    }
    if let Some(chol) = a.clone().cholesky() {
        let inv = chol.inverse();
        if inv.iter().all(|v| v.is_finite()) {
            return Ok(inv);
        }
    }
    a.clone()
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(MvmfError::Singular(what))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_and_indefinite_paths_agree_with_hand_solution() {
        let spd = DMatrix::<f64>::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x = solve_symmetric(&spd, &DVector::from_vec(vec![1.0, 2.0]), "t").unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);

        let indefinite = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let y = solve_symmetric(&indefinite, &DVector::from_vec(vec![2.0, 3.0]), "t").unwrap();
        assert_eq!(y.as_slice(), &[3.0, 2.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::<f64>::zeros(2, 2);
        let err = solve_symmetric(&a, &DVector::zeros(2), "zero").unwrap_err();
        assert_eq!(err, MvmfError::Singular("zero"));
        assert!(inverse_symmetric(&a, "zero").is_err());
    }
}
