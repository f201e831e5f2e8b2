// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::DasConfig;
use super::grad::PreparedPair;
use super::pairs::PatchPair;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, Matrix};
use crate::model_zoo::SyntheticPathwayModel;
use crate::random::{orthonormal_columns, substream};
use crate::report::{format_g17, CsvTable};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub mean_loss: f64,
}

/// Result of a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DasRun<T> {
    pub basis: Matrix<T>,
    /// Mean loss over all training pairs before the first step.
    pub initial_mean_loss: f64,
    /// Mean loss over all training pairs after the last step.
    pub final_mean_loss: f64,
    /// Mean minibatch loss per step.
    pub trace: Vec<TracePoint>,
}

/// Trains a subspace and returns its orthonormal basis.
pub fn das_train<T: Real>(model: &SyntheticPathwayModel<T>, pairs: &[PatchPair<T>], config: &DasConfig) -> Result<Matrix<T>> {
    Ok(das_train_with_trace(model, pairs, config)?.basis)
}

fn mean_loss<T: Real>(model: &SyntheticPathwayModel<T>, prepared: &[PreparedPair<T>], basis: &Matrix<T>, config: &DasConfig) -> Result<f64> {
    let losses = prepared
        .par_iter()
        .map(|p| p.loss(model, basis, config.site))
        .collect::<Result<Vec<T>>>()?;
    Ok(losses.iter().map(|l| l.as_f64()).sum::<f64>() / losses.len() as f64)
}

/// Plain gradient descent on the basis with a thin-QR retraction after
/// every step. Minibatches are drawn with replacement from a stream seeded
/// by `config.seed`; per-pair gradients are computed in parallel and summed
/// in pair order, so the result does not depend on the thread count.
pub fn das_train_with_trace<T: Real>(
    model: &SyntheticPathwayModel<T>,
    pairs: &[PatchPair<T>],
    config: &DasConfig,
) -> Result<DasRun<T>> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("DAS training pairs"));
    }
    let site = config.site;
    let dim = model.site_dim(site);
    if config.subspace_dim > dim {
        return Err(Error::Config(format!(
            "das.subspace_dim {} exceeds site dimension {dim}",
            config.subspace_dim
        )));
    }
    let prepared = pairs
        .par_iter()
        .map(|p| PreparedPair::new(model, p, site))
        .collect::<Result<Vec<_>>>()?;

    let mut basis: Matrix<T> = orthonormal_columns(&mut substream(config.seed, 0), dim, config.subspace_dim);
    let initial_mean_loss = mean_loss(model, &prepared, &basis, config)?;
    let lr = T::lit(config.learning_rate);
    let mut batch_rng = substream(config.seed, 1);
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let batch: Vec<usize> = (0..config.batch_size).map(|_| batch_rng.random_range(0..prepared.len())).collect();
        let parts = batch
            .par_iter()
            .map(|&i| prepared[i].loss_and_grad(model, &basis, site))
            .collect::<Result<Vec<_>>>()?;
        let n = T::from_usize(batch.len()).unwrap();
        let mut grad = Matrix::zeros(dim, config.subspace_dim);
        let mut loss = T::zero();
        for (l, g) in &parts {
            loss = loss + *l;
            grad = grad.add(g);
        }
        let loss = loss / n;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged { step, loss: loss.as_f64() });
        }
        trace.push(TracePoint { step, mean_loss: loss.as_f64() });
        if config.learning_rate == 0.0 {
            continue;
        }
        let stepped = basis.sub(&grad.scale(lr / n));
        basis = thin_qr(&stepped).map_err(|_| Error::Diverged { step, loss: loss.as_f64() })?.0;
    }

    let final_mean_loss = mean_loss(model, &prepared, &basis, config)?;
    if !final_mean_loss.is_finite() {
        return Err(Error::Diverged { step: config.steps, loss: final_mean_loss });
    }
    Ok(DasRun { basis, initial_mean_loss, final_mean_loss, trace })
}

/// `step,mean_loss` table of a training trace.
pub fn trace_csv(trace: &[TracePoint]) -> CsvTable {
    let mut t = CsvTable::new(&["step", "mean_loss"]);
    for p in trace {
        t.push_row(vec![p.step.to_string(), format_g17(p.mean_loss)]);
    }
    t
}
