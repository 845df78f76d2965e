//! Small dense row-major matrices and the symmetric solves the row updates need.
//!
//! Factor matrices here are tiny (alphabet sizes in the tens, ranks below ~64),
//! so a plain `Vec<f64>` layout with an unblocked Cholesky and, for the
//! rank-deficient corner case, a Jacobi eigendecomposition covers everything
//! without pulling in a LAPACK binding.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major value buffer. Panics if lengths disagree.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of squared entries (squared Frobenius norm).
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Symmetric positive-definite solve of `a x = b` via unblocked Cholesky.
///
/// `a` is given packed row-major (`n x n`, only the full square is read).
/// Returns `None` when a pivot is not safely positive, in which case the
/// caller should fall back to [`min_norm_solve`].
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = a.to_vec();
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(math::abs(a[i * n + i])));
    let tol = max_diag.max(1.0) * 1e-13;
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= tol * 1e-2 {
            return None;
        }
        let d = math::sqrt(d);
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = l[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }
    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    Some(x)
}

/// Minimum-norm solution of a symmetric (possibly singular) system `a x = b`
/// via a cyclic Jacobi eigendecomposition: `x = V diag(1/lambda_i)+ V^T b`,
/// zeroing the reciprocals of eigenvalues below a relative tolerance.
pub fn min_norm_solve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.to_vec();
    // V starts as identity, accumulates rotations.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off <= 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig_max = (0..n).fold(0.0f64, |mx, i| mx.max(math::abs(m[i * n + i])));
    let cutoff = eig_max.max(1e-300) * 1e-12;
    let mut x = vec![0.0; n];
    for i in 0..n {
        let lambda = m[i * n + i];
        if math::abs(lambda) <= cutoff {
            continue;
        }
        let mut proj = 0.0;
        for k in 0..n {
            proj += v[k * n + i] * b[k];
        }
        let scale = proj / lambda;
        for k in 0..n {
            x[k] += scale * v[k * n + i];
        }
    }
    x
}
