// SPDX-License-Identifier: MIT OR Apache-2.0

use super::matrix::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin QR factorization `A = Q R` by modified Gram–Schmidt with one round of
/// reorthogonalization. `R` has a nonnegative diagonal.
///
/// Fails with [`Error::Degenerate`] when a column is (numerically) dependent
/// on the ones before it.
pub fn thin_qr<T: Real>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, n) = a.shape();
    if n > m {
        return Err(Error::InvalidArgument(format!(
            "thin QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut q_cols: Vec<Vector<T>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    let scale = a.max_abs().max(T::min_positive_value());
    for j in 0..n {
        let mut x = a.column(j);
        for _pass in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let c = qi.dot(&x);
                r[(i, j)] = r[(i, j)] + c;
                x.axpy(-c, qi);
            }
        }
        let nrm = x.norm();
        if nrm <= scale * T::epsilon() * T::lit(64.0 * m as f64) {
            return Err(Error::Degenerate(format!("column {j} is linearly dependent")));
        }
        r[(j, j)] = nrm;
        q_cols.push(x.scale(T::one() / nrm));
    }
    Ok((Matrix::from_columns(m, &q_cols), r))
}

/// The `Q` factor of [`thin_qr`].
pub fn orthonormalize_columns<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    thin_qr(a).map(|(q, _)| q)
}
