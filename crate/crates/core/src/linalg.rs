//! Small dense linear-algebra helpers shared across the crate.
//!
//! Networks are small (J <= 32), so everything is dense and solves go through
//! partial-pivot LU. The one hand-rolled routine is a tolerant Cholesky that
//! accepts positive *semi*definite input, which the stock decomposition
//! rejects.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not positive semidefinite (pivot {pivot:.3e} in column {col})")]
    NotPsd { col: usize, pivot: f64 },
}

/// Solves `a x = b` by partial-pivot LU.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    a.clone().lu().solve(b).ok_or(LinalgError::Singular)
}

/// Dense inverse by partial-pivot LU.
pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    a.clone().lu().try_inverse().ok_or(LinalgError::Singular)
}

/// Maximum absolute row sum, the operator norm induced by the sup norm.
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entrywise absolute difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest absolute off-diagonal asymmetry `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Lower-triangular `l` with `l l' = gamma` for symmetric positive
/// semidefinite input.
///
/// Pivots below `tol * scale` (scale = largest diagonal entry) are flushed to
/// zero together with their column, so rank-deficient covariances such as
/// deterministic coordinates are accepted; a pivot below `-tol * scale` is a
/// genuine negative direction and fails.
pub fn psd_cholesky(gamma: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let n = gamma.nrows();
    assert_eq!(n, gamma.ncols(), "square input required");
    let scale = (0..n).map(|i| gamma[(i, i)].abs()).fold(1.0, f64::max);
    let mut l = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut d = gamma[(k, k)];
        for j in 0..k {
            d -= l[(k, j)] * l[(k, j)];
        }
        if d < -tol * scale {
            return Err(LinalgError::NotPsd { col: k, pivot: d });
        }
        if d <= tol * scale {
            // Semidefinite direction: the whole column stays zero.
            continue;
        }
        let root = d.sqrt();
        l[(k, k)] = root;
        for i in (k + 1)..n {
            let mut s = gamma[(i, k)];
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)];
            }
            l[(i, k)] = s / root;
        }
    }
    Ok(l)
}

/// Checks the M-matrix property: positive diagonal, nonpositive off-diagonal
/// entries, and an entrywise nonnegative inverse.
pub fn is_m_matrix(r: &DMatrix<f64>, tol: f64) -> bool {
    let n = r.nrows();
    if n != r.ncols() {
        return false;
    }
    for i in 0..n {
        if r[(i, i)] <= 0.0 {
            return false;
        }
        for j in 0..n {
            if i != j && r[(i, j)] > tol {
                return false;
            }
        }
    }
    match inverse(r) {
        Ok(inv) => inv.iter().all(|&x| x >= -tol),
        Err(_) => false,
    }
}
