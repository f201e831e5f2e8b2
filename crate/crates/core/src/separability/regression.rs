// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{solve_spd, Matrix, Vector};
use crate::model_zoo::{sample_example, SyntheticPathwayModel};
use crate::patching::check_unit;
use crate::random::{rng, sign};
use crate::scalar::Real;

/// Default ℓ₂ penalty of the multi-predictor ridge.
pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ridge regression of `y` on one predictor with an unpenalized intercept.
/// `lambda = 0` is ordinary least squares.
pub fn ridge_regression(x: &[f64], y: &[f64], lambda: f64) -> Result<RegressionFit> {
    ensure_dim("ridge responses", x.len(), y.len())?;
    if x.len() < 3 {
        return Err(Error::InvalidArgument(format!("ridge regression needs n >= 3, got {}", x.len())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("predictor has zero variance".into()));
    }
    if syy == 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let slope = if lambda.is_infinite() { 0.0 } else { sxy / (sxx + lambda) };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(RegressionFit { slope, intercept, r_squared: (1.0 - ss_res / syy).clamp(0.0, 1.0), n: x.len() })
}

/// Ridge regression of `y` on the columns of `features` (intercept
/// unpenalized, via centering), solved through the normal equations.
/// Returns `(coefficients, intercept)`.
pub fn ridge_regression_multi(features: &Matrix<f64>, y: &[f64], lambda: f64) -> Result<(Vector<f64>, f64)> {
    ensure_dim("ridge responses", features.rows(), y.len())?;
    if features.rows() < 2 {
        return Err(Error::InvalidArgument("ridge regression needs at least 2 rows".into()));
    }
    let (n, d) = features.shape();
    let col_mean = Vector::from_fn(d, |j| (0..n).map(|i| features[(i, j)]).sum::<f64>() / n as f64);
    let ym = mean(y);
    let xc = Matrix::from_fn(n, d, |i, j| features[(i, j)] - col_mean[j]);
    let yc = Vector::from_fn(n, |i| y[i] - ym);
    let gram = xc.tr_matmul(&xc).add(&Matrix::identity(d).scale(lambda));
    let beta = solve_spd(&gram, &xc.tr_matvec(&yc))?;
    let intercept = ym - beta.dot(&col_mean);
    Ok((beta, intercept))
}

/// Predicts `directionᵀ·resid_pre` from post-GELU MLP features with a
/// multi-predictor ridge fit on 80% of `n` sampled examples. `r_squared` is
/// measured on the held-out 20%; `slope` and `intercept` calibrate the
/// held-out predictions against the truth.
pub fn residual_projection_regression<T: Real>(
    model: &SyntheticPathwayModel<T>,
    direction: &Vector<T>,
    n: usize,
    lambda: f64,
    seed: u64,
) -> Result<RegressionFit> {
    if n < 50 {
        return Err(Error::InvalidArgument(format!("residual projection regression needs n >= 50, got {n}")));
    }
    check_unit(direction)?;
    let mut g = rng(seed);
    let mut feats = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let label = sign(&mut g);
        let u = sample_example(model, label, g.random())?;
        target.push(direction.dot(&u).as_f64());
        feats.push(Vector::from_f64(&model.mlp.post_activation(&u).to_f64()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut g);
    let n_train = n * 4 / 5;
    let (tr, te) = order.split_at(n_train);
    let x_tr = Matrix::from_row_vectors(&tr.iter().map(|&i| feats[i].clone()).collect::<Vec<_>>());
    let y_tr: Vec<f64> = tr.iter().map(|&i| target[i]).collect();
    let y_te: Vec<f64> = te.iter().map(|&i| target[i]).collect();
    if y_tr.iter().all(|&v| v == y_tr[0]) {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let (beta, b0) = ridge_regression_multi(&x_tr, &y_tr, lambda)?;
    let pred: Vec<f64> = te.iter().map(|&i| beta.dot(&feats[i]) + b0).collect();
    let my = mean(&y_te);
    let ss_tot: f64 = y_te.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y_te.iter().zip(&pred).map(|(v, p)| (v - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("held-out response has zero variance".into()));
    }
    let calib = ridge_regression(&pred, &y_te, 0.0)?;
    Ok(RegressionFit {
        slope: calib.slope,
        intercept: calib.intercept,
        r_squared: (1.0 - ss_res / ss_tot).clamp(0.0, 1.0),
        n,
    })
}
