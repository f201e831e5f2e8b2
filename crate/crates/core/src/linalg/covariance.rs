// SPDX-License-Identifier: MIT OR Apache-2.0

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `(1/n) XᵀX + ridge · I` for row-activations `X` (n × d).
pub fn uncentered_covariance<T: Real>(samples: &Matrix<T>, ridge: T) -> Result<Matrix<T>> {
    let (n, d) = samples.shape();
    if n == 0 {
        return Err(Error::Empty("covariance samples"));
    }
    if ridge < T::zero() {
        return Err(Error::InvalidArgument("ridge must be >= 0".into()));
    }
    let inv_n = T::one() / T::lit(n as f64);
    let mut sigma = Matrix::zeros(d, d);
    for r in 0..n {
        let x = samples.row(r);
        for i in 0..d {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            for j in i..d {
                sigma[(i, j)] = sigma[(i, j)] + xi * x[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = sigma[(i, j)] * inv_n;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
        sigma[(i, i)] = sigma[(i, i)] + ridge;
    }
    Ok(sigma)
}

/// Default ridge `1e-8 · trace(Σ₀) / d` where `Σ₀` is the unregularized
/// uncentered covariance.
pub fn default_ridge<T: Real>(samples: &Matrix<T>) -> T {
    let (n, d) = samples.shape();
    if n == 0 || d == 0 {
        return T::zero();
    }
    let total: T = samples.as_slice().iter().map(|&x| x * x).sum();
    T::lit(1e-8) * total / T::lit((n * d) as f64)
}

/// Uncentered covariance with [`default_ridge`].
pub fn activation_covariance<T: Real>(samples: &Matrix<T>) -> Result<Matrix<T>> {
    uncentered_covariance(samples, default_ridge(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;
    use crate::random::{gaussian_matrix, rng};

    #[test]
    fn single_sample_outer_product() {
        let x = Matrix::<f64>::from_f64_rows(&[&[1.0, 0.0, 0.0]]).unwrap();
        let s = uncentered_covariance(&x, 0.0).unwrap();
        let mut e = Matrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        assert_eq!(s, e);
    }

    #[test]
    fn scaled_identity_rows_give_identity() {
        let n = 5;
        let x = Matrix::<f64>::identity(n).scale((n as f64).sqrt());
        let s = uncentered_covariance(&x, 0.0).unwrap();
        assert!(s.sub(&Matrix::identity(n)).max_abs() < 1e-15);
    }

    #[test]
    fn random_covariance_is_symmetric_with_ridge_floor() {
        let mut g = rng(9);
        let x: Matrix<f64> = gaussian_matrix(&mut g, 1000, 16, 1.0);
        let ridge = 0.01;
        let s = uncentered_covariance(&x, ridge).unwrap();
        assert!(s.sub(&s.transpose()).frobenius_norm() < 1e-12);
        let r = svd(&s).unwrap();
        let min = *r.singular_values.as_slice().last().unwrap();
        assert!(min >= ridge - 1e-12);
    }
}
