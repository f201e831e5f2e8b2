// SPDX-License-Identifier: MIT OR Apache-2.0

use super::matrix::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive
/// definite matrix, kept around so several right-hand sides can share it.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let (n, c) = a.shape();
        if n != c {
            return Err(Error::DimensionMismatch {
                context: "cholesky (square)",
                expected: n,
                actual: c,
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("cholesky input"));
        }
        let scale = a.max_abs().max(T::one());
        let asym = a.asymmetry();
        let sym_tol = if T::epsilon() < T::lit(1e-10) {
            T::lit(1e-10)
        } else {
            T::epsilon() * T::lit(64.0)
        };
        if asym > sym_tol * scale {
            return Err(Error::NotSymmetric(asym.as_f64()));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d.is_nan() || d <= T::zero() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d.as_f64(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_l(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &Vector<T>) -> Result<Vector<T>> {
        let n = self.dim();
        crate::error::ensure_dim("cholesky rhs", n, rhs.len())?;
        let mut y = rhs.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        Ok(y)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        crate::error::ensure_dim("cholesky rhs", self.dim(), b.rows())?;
        let cols = b
            .columns()
            .iter()
            .map(|c| self.solve(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_columns(b.rows(), &cols))
    }

    /// `L z`, which maps standard normal `z` to a sample with covariance `A`.
    pub fn mul_l(&self, z: &Vector<T>) -> Vector<T> {
        let n = self.dim();
        Vector::from_fn(n, |i| {
            (0..=i).fold(T::zero(), |acc, k| acc + self.l[(i, k)] * z[k])
        })
    }
}

/// Solves `A x = rhs` for symmetric positive definite `A`.
pub fn solve_spd<T: Real>(a: &Matrix<T>, rhs: &Vector<T>) -> Result<Vector<T>> {
    Cholesky::factor(a)?.solve(rhs)
}
