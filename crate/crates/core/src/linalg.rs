use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Ratio of extreme eigenvalues of a symmetric matrix (infinite if not positive definite).
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Solves `S x = b` for symmetric positive definite `S`.
pub(crate) fn spd_solve(s: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    Ok(chol.solve(b))
}

pub(crate) fn spd_inverse(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    Ok(chol.inverse())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
