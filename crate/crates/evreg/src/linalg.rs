//! Internal helpers over nalgebra for the small dense matrices used here
//! (order k + m, rarely above ten).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// (sign, ln |det A|) via an LU factorization; sign 0.0 flags a singular or
/// non-finite factorization.
pub fn sign_log_det(a: &DMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (1.0, 0.0);
    }
    let lu = a.clone().lu();
    let mut sign: f64 = lu.p().determinant();
    let mut ln = 0.0;
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        ln += d.abs().ln();
    }
    (sign, ln)
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(context.to_string()))
}

pub fn inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(context.to_string()))
}

/// 2-norm condition number from singular values; infinite when singular.
pub fn condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for s in sv.iter() {
        lo = lo.min(*s);
        hi = hi.max(*s);
    }
    if lo <= 0.0 || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Submatrix by row and column index lists (order-preserving).
pub fn select(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}
