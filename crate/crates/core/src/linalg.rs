//! Dense symmetric linear algebra used across the crate.
//!
//! The eigensolver is a cyclic Jacobi rotation scheme. It is slower than a
//! tridiagonal QL reduction but converges to near machine precision on the
//! small (n ≈ 100) symmetric matrices this crate works with, and its
//! eigenvectors come out orthonormal to working precision.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Off-diagonal Frobenius mass below which the rotation sweeps stop,
/// relative to the Frobenius norm of the input.
pub const JACOBI_REL_TOL: f64 = 1e-12;

/// Upper bound on full Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Absolute asymmetry tolerated by [`check_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix contains a non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps (off-diagonal mass {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

pub fn check_square(a: &DMatrix<f64>) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// Checks squareness, finiteness and symmetry within `tol`.
pub fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<(), LinalgError> {
    check_square(a)?;
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { i, j });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > tol {
                return Err(LinalgError::NotSymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi sweeps until the off-diagonal mass is negligible. Returns
/// the rotated (numerically diagonal) matrix and, if requested, the
/// accumulated rotations.
fn jacobi(a: &DMatrix<f64>, vectors: bool) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>), LinalgError> {
    check_symmetric(a, SYMMETRY_TOL)?;
    let n = a.nrows();
    // work on the exactly symmetric part
    let mut m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = vectors.then(|| DMatrix::<f64>::identity(n, n));

    let target = JACOBI_REL_TOL * m.norm();
    let mut sweeps = 0;
    let mut residual = off_diagonal_norm(&m);
    while residual > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, residual });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // rotation angle that annihilates m[p,q]
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                rotate_columns(m.as_mut_slice(), n, p, q, c, s);
                // restore symmetry: rows p and q mirror the updated columns
                for k in 0..n {
                    m[(p, k)] = m[(k, p)];
                    m[(q, k)] = m[(k, q)];
                }
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                if let Some(v) = v.as_mut() {
                    rotate_columns(v.as_mut_slice(), n, p, q, c, s);
                }
            }
        }
        residual = off_diagonal_norm(&m);
    }
    Ok((m, v))
}

/// `(col_p, col_q) <- (c·col_p - s·col_q, s·col_p + c·col_q)` on a
/// column-major `n × n` buffer, `p < q`.
fn rotate_columns(data: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * n);
    let cp = &mut head[p * n..(p + 1) * n];
    let cq = &mut tail[..n];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted ascending. Each eigenvector is normalised and its
/// sign fixed so that its largest-magnitude component (first one on ties) is
/// nonnegative, which makes the output deterministic.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen, LinalgError> {
    let (m, v) = jacobi(a, true)?;
    let v = v.expect("eigenvectors requested");
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        let mut lead = 0;
        for k in 1..n {
            if col[k].abs() > col[lead].abs() {
                lead = k;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }

    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64, LinalgError> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let (m, _) = jacobi(a, false)?;
    Ok(m.diagonal().iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
}

/// Linear-interpolation quantile of already sorted data, with the quantile
/// placed at position `q * (n - 1)` (zero-indexed).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
