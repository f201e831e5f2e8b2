// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::regression::{ridge_regression, RegressionFit};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{KernelProjector, Matrix};
use crate::model_zoo::{gelu_vec, sample_example, SyntheticPathwayModel};
use crate::random::{rng, sign};
use crate::scalar::Real;

/// Inner products of difference vectors for one quadruple `(i, j, k, l)`:
/// `a = (x_i − x_j)ᵀ(x_k − x_l)` and the same in the transformed space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrupleSample {
    pub a_val: f64,
    pub b_val: f64,
    pub indices: [usize; 4],
}

fn diff_dot<T: Real>(m: &Matrix<T>, [i, j, k, l]: [usize; 4]) -> f64 {
    (0..m.cols())
        .map(|c| ((m[(i, c)] - m[(j, c)]) * (m[(k, c)] - m[(l, c)])).as_f64())
        .sum()
}

/// Draws `count` quadruples of distinct row indices and evaluates both
/// inner products.
pub fn sample_quadruple_products<T: Real>(x: &Matrix<T>, z: &Matrix<T>, count: usize, seed: u64) -> Result<Vec<QuadrupleSample>> {
    ensure_dim("quadruple rows", x.rows(), z.rows())?;
    if x.rows() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 examples, got {}", x.rows())));
    }
    let mut g = rng(seed);
    Ok((0..count)
        .map(|_| {
            let idx = sample(&mut g, x.rows(), 4);
            let q = [idx.index(0), idx.index(1), idx.index(2), idx.index(3)];
            QuadrupleSample { a_val: diff_dot(x, q), b_val: diff_dot(z, q), indices: q }
        })
        .collect())
}

/// Least-squares fit of `b_val` on `a_val` over sampled quadruples.
pub fn distortion_fit<T: Real>(x: &Matrix<T>, z: &Matrix<T>, count: usize, seed: u64) -> Result<RegressionFit> {
    let qs = sample_quadruple_products(x, z, count, seed)?;
    let a: Vec<f64> = qs.iter().map(|q| q.a_val).collect();
    let b: Vec<f64> = qs.iter().map(|q| q.b_val).collect();
    ridge_regression(&a, &b, 0.0)
}

/// Distortion regression of the map "pre-activation ↦ kernel projection of
/// the post-activation" on sampled model inputs.
pub fn distortion_regression<T: Real>(
    model: &SyntheticPathwayModel<T>,
    n_examples: usize,
    n_quadruples: usize,
    seed: u64,
) -> Result<RegressionFit> {
    let kp = KernelProjector::new(&model.mlp.w_out)?;
    if kp.null_basis().cols() == 0 {
        return Err(Error::Degenerate("W_out has a trivial kernel".into()));
    }
    let mut g = rng(seed);
    let mut pre_rows = Vec::with_capacity(n_examples);
    let mut ker_rows = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let label = sign(&mut g);
        let u = sample_example(model, label, g.random())?;
        let pre = model.mlp.pre_activation(&u);
        // Coordinates in an orthonormal kernel basis preserve inner products.
        ker_rows.push(kp.null_basis().tr_matvec(&gelu_vec(&pre)));
        pre_rows.push(pre);
    }
    distortion_fit(&Matrix::from_row_vectors(&pre_rows), &Matrix::from_row_vectors(&ker_rows), n_quadruples, seed ^ 0x5eed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, orthogonal_matrix};

    #[test]
    fn identical_and_scaled_spaces() {
        let mut g = rng(1);
        let x: Matrix<f64> = gaussian_matrix(&mut g, 20, 5, 1.0);
        for q in sample_quadruple_products(&x, &x, 50, 2).unwrap() {
            assert_eq!(q.a_val, q.b_val);
            let mut s = q.indices.to_vec();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 4);
        }
        for q in sample_quadruple_products(&x, &x.scale(2.0), 50, 2).unwrap() {
            assert!((q.b_val - 4.0 * q.a_val).abs() < 1e-12 * (1.0 + q.a_val.abs()));
        }
        let o: Matrix<f64> = orthogonal_matrix(&mut g, 5);
        let rotated = x.matmul(&o.transpose());
        for q in sample_quadruple_products(&x, &rotated, 50, 3).unwrap() {
            assert!((q.b_val - q.a_val).abs() < 1e-10);
        }
        let three: Matrix<f64> = gaussian_matrix(&mut g, 3, 5, 1.0);
        assert!(sample_quadruple_products(&three, &three, 1, 0).is_err());
    }

    #[test]
    fn identity_map_has_unit_slope() {
        let mut g = rng(4);
        let x: Matrix<f64> = gaussian_matrix(&mut g, 40, 6, 1.0);
        let f = distortion_fit(&x, &x, 100, 1).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }
}
