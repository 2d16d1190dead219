//! Thin wrappers over faer's dense LU.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivot ratio below which a factorization is treated as singular.
const RCOND_FLOOR: f64 = 1e-13;

/// Solve `A X = B` with partial-pivoting LU.
///
/// Fails with a numeric error carrying the pivot-ratio condition estimate when
/// `A` is singular to working precision.
pub fn lu_solve(a: MatRef<'_, Complex64>, rhs: MatRef<'_, Complex64>) -> Result<Mat<Complex64>> {
    if a.nrows() != a.ncols() || a.nrows() != rhs.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "cannot solve {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            rhs.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, rhs.ncols()));
    }
    let lu = a.partial_piv_lu();
    let rcond = pivot_rcond(lu.U());
    if !(rcond > RCOND_FLOOR) {
        return Err(Error::numeric("singular scattering system", Some(rcond)));
    }
    let x = lu.solve(rhs);
    if !is_finite(x.as_ref()) {
        return Err(Error::numeric("non-finite solution", Some(rcond)));
    }
    Ok(x)
}

/// `min |u_ii| / max |u_ii|` over the diagonal of an upper-triangular factor.
pub fn pivot_rcond(u: MatRef<'_, Complex64>) -> f64 {
    let n = u.nrows().min(u.ncols());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let v = u[(i, i)].norm();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 || !hi.is_finite() {
        0.0
    } else {
        lo / hi
    }
}

pub fn is_finite(m: MatRef<'_, Complex64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Largest entry-wise modulus difference between two matrices of equal shape.
pub fn max_abs_diff(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}
