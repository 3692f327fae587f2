//! Small dense linear-algebra helpers shared by the numeric modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Returns `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Lower Cholesky factor, or an error naming the matrix that failed.
pub(crate) fn cholesky_lower(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(symmetrize(m))
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite(what))
}

/// Closed-form KL(p ‖ q) between two multivariate Gaussians.
pub(crate) fn gaussian_kl(
    mean_p: &DVector<f64>,
    cov_p: &DMatrix<f64>,
    mean_q: &DVector<f64>,
    cov_q: &DMatrix<f64>,
) -> Result<f64> {
    let d = mean_p.len() as f64;
    let chol_q = nalgebra::Cholesky::new(symmetrize(cov_q))
        .ok_or(Error::NotPositiveDefinite("KL reference covariance"))?;
    let chol_p = nalgebra::Cholesky::new(symmetrize(cov_p))
        .ok_or(Error::NotPositiveDefinite("KL covariance"))?;
    let trace_term = chol_q.solve(cov_p).trace();
    let diff = mean_q - mean_p;
    let maha = diff.dot(&chol_q.solve(&diff));
    let logdet_q: f64 = 2.0 * chol_q.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let logdet_p: f64 = 2.0 * chol_p.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok((0.5 * (trace_term + maha - d + logdet_q - logdet_p)).max(0.0))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != ncols {
            return Err(Error::DimensionMismatch {
                context,
                expected: ncols,
                actual: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
