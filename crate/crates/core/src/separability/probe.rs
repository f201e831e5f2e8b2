// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model_zoo::{gelu_vec, sample_example, SyntheticPathwayModel};
use crate::random::{rng, sign, substream, unit_vector};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Held-out accuracy.
    pub accuracy: f64,
    /// Injection scale; 0 when the probe was trained on given features.
    pub z: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub lambda: f64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { lambda: 1e-3, steps: 2000, lr: 0.1 }
    }
}

/// A trained probe together with its training-loss history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    pub result: ProbeResult,
    pub train_accuracy: f64,
    /// Regularized training loss before each step.
    pub loss_trace: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized logistic regression trained by batch gradient descent on
/// a deterministic 80/20 split; features are standardized with training
/// statistics.
pub fn logistic_probe<T: Real>(features: &Matrix<T>, labels: &[i8], lambda: f64, steps: usize, lr: f64, seed: u64) -> Result<ProbeResult> {
    Ok(logistic_probe_detailed(features, labels, ProbeSettings { lambda, steps, lr }, seed)?.result)
}

pub fn logistic_probe_detailed<T: Real>(features: &Matrix<T>, labels: &[i8], settings: ProbeSettings, seed: u64) -> Result<ProbeFit> {
    ensure_dim("probe labels", features.rows(), labels.len())?;
    for cls in [-1i8, 1] {
        if labels.iter().filter(|&&l| l == cls).count() < 2 {
            return Err(Error::Degenerate(format!("probe needs at least 2 examples of class {cls}")));
        }
    }
    if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument(format!("labels must be +1 or -1, got {bad}")));
    }
    let (n, d) = features.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let n_train = (n * 4 / 5).clamp(1, n - 1);
    let (tr, te) = order.split_at(n_train);

    let mut mu = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for &i in tr {
        for j in 0..d {
            mu[j] += features[(i, j)].as_f64();
        }
    }
    mu.iter_mut().for_each(|m| *m /= n_train as f64);
    for &i in tr {
        for j in 0..d {
            sd[j] += (features[(i, j)].as_f64() - mu[j]).powi(2);
        }
    }
    sd.iter_mut().for_each(|s| {
        *s = (*s / n_train as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    });
    let standardize = |rows: &[usize]| {
        Matrix::from_fn(rows.len(), d, |r, j| (features[(rows[r], j)].as_f64() - mu[j]) / sd[j])
    };
    let x_tr = standardize(tr);
    let x_te = standardize(te);
    let y = |i: usize| labels[i] as f64;
    let y_tr: Vec<f64> = tr.iter().map(|&i| y(i)).collect();

    let mut w = Vector::<f64>::zeros(d);
    let mut b = 0.0;
    let mut trace = Vec::with_capacity(settings.steps);
    let nt = n_train as f64;
    for _ in 0..settings.steps {
        let margins: Vec<f64> = x_tr.matvec(&w).iter().zip(&y_tr).map(|(s, yi)| yi * (s + b)).collect();
        let loss = margins.iter().map(|m| softplus(-m)).sum::<f64>() / nt + 0.5 * settings.lambda * w.norm_sq();
        trace.push(loss);
        // d/ds softplus(−y s) = −y σ(−y s)
        let coef: Vec<f64> = margins.iter().zip(&y_tr).map(|(m, yi)| -yi * sigmoid(-m) / nt).collect();
        let coef = Vector::from_f64(&coef);
        let gw = x_tr.tr_matvec(&coef).plus_scaled(settings.lambda, &w);
        let gb: f64 = coef.iter().sum();
        w.axpy(-settings.lr, &gw);
        b -= settings.lr * gb;
    }
    let acc = |x: &Matrix<f64>, rows: &[usize]| {
        let s = x.matvec(&w);
        rows.iter().enumerate().filter(|(r, &i)| (s[*r] + b >= 0.0) == (labels[i] > 0)).count() as f64 / rows.len() as f64
    };
    Ok(ProbeFit {
        result: ProbeResult { accuracy: acc(&x_te, te), z: 0.0, seed },
        train_accuracy: acc(&x_tr, tr),
        loss_trace: trace,
    })
}

/// For each `z`: draws a random unit direction `v` in the residual stream,
/// samples inputs `u` and labels `y`, injects `u' = u + y·z·‖u‖·v`, and
/// probes `y` from `gelu(W_in u' + b_in)`.
pub fn injected_direction_experiment<T: Real>(
    model: &SyntheticPathwayModel<T>,
    z_values: &[f64],
    n_per_z: usize,
    seed: u64,
) -> Result<Vec<ProbeResult>> {
    injected_direction_experiment_with(model, z_values, n_per_z, seed, ProbeSettings::default())
}

pub fn injected_direction_experiment_with<T: Real>(
    model: &SyntheticPathwayModel<T>,
    z_values: &[f64],
    n_per_z: usize,
    seed: u64,
    settings: ProbeSettings,
) -> Result<Vec<ProbeResult>> {
    if let Some(bad) = z_values.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
        return Err(Error::InvalidArgument(format!("z values must be >= 0, got {bad}")));
    }
    z_values
        .par_iter()
        .enumerate()
        .map(|(k, &z)| {
            let run_seed = seed.wrapping_add(k as u64);
            let mut g = substream(seed, k as u64 + 1);
            let v: Vector<T> = unit_vector(&mut g, model.d_resid);
            let mut rows = Vec::with_capacity(n_per_z);
            let mut ys = Vec::with_capacity(n_per_z);
            for _ in 0..n_per_z {
                let feature_label = sign(&mut g);
                let u = sample_example(model, feature_label, g.random())?;
                let y = sign(&mut g);
                let scale = T::from_i8(y).unwrap() * T::lit(z) * u.norm();
                let u2 = u.plus_scaled(scale, &v);
                rows.push(gelu_vec(&model.mlp.pre_activation(&u2)));
                ys.push(y);
            }
            let fit = logistic_probe_detailed(&Matrix::from_row_vectors(&rows), &ys, settings, run_seed)?;
            Ok(ProbeResult { z, ..fit.result })
        })
        .collect()
}
