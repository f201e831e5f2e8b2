// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::patching::PatchOutcome;
use crate::scalar::Real;

/// Clean logit differences at or below this magnitude are excluded from
/// FLDD aggregates.
pub const FLDD_EPSILON: f64 = 1e-6;

/// Fractional logit difference decrease, `1 − patched/clean`.
pub fn fldd(clean_logitdiff: f64, patched_logitdiff: f64) -> Result<f64> {
    if !(clean_logitdiff.abs() > FLDD_EPSILON) {
        return Err(Error::Degenerate(format!(
            "clean logit difference {clean_logitdiff} is below the FLDD threshold"
        )));
    }
    Ok(1.0 - patched_logitdiff / clean_logitdiff)
}

/// Aggregate FLDD over a batch of outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlddSummary {
    pub mean: f64,
    pub median: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Mean and median of per-example FLDD; near-zero clean logit differences
/// are counted and skipped.
pub fn summarize_fldd<T: Real>(outcomes: &[PatchOutcome<T>]) -> FlddSummary {
    let mut values: Vec<f64> = Vec::with_capacity(outcomes.len());
    let mut excluded = 0;
    for o in outcomes {
        match fldd(o.clean_logitdiff.as_f64(), o.patched_logitdiff.as_f64()) {
            Ok(v) => values.push(v),
            Err(_) => excluded += 1,
        }
    }
    if values.is_empty() {
        return FlddSummary { mean: f64::NAN, median: f64::NAN, evaluated: 0, excluded };
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let k = values.len();
    let median = if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) };
    FlddSummary { mean, median, evaluated: k, excluded }
}

/// What counts as a successful interchange.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipRule {
    /// The patched run predicts the class the clean run did not.
    #[default]
    SignFlip,
}

pub fn interchange_accuracy<T: Real>(outcomes: &[PatchOutcome<T>], rule: FlipRule) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("interchange outcomes"));
    }
    let hits = outcomes
        .iter()
        .filter(|o| match rule {
            FlipRule::SignFlip => {
                let clean_class = o.clean_logitdiff < T::zero();
                let patched_class = o.patched_logitdiff < T::zero();
                clean_class != patched_class
            }
        })
        .count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// `(p_int − p_clean)/(1 − p_clean)`.
pub fn rewrite_score(p_clean_target: f64, p_intervened_target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_clean_target) {
        return Err(Error::InvalidArgument(format!(
            "clean target probability must lie in [0, 1), got {p_clean_target}"
        )));
    }
    if !(0.0..=1.0).contains(&p_intervened_target) {
        return Err(Error::InvalidArgument(format!(
            "intervened target probability must lie in [0, 1], got {p_intervened_target}"
        )));
    }
    Ok((p_intervened_target - p_clean_target) / (1.0 - p_clean_target))
}

pub fn cosine<T: Real>(u: &Vector<T>, v: &Vector<T>) -> Result<T> {
    ensure_dim("cosine", u.len(), v.len())?;
    let (nu, nv) = (u.norm(), v.norm());
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroVector("cosine argument"));
    }
    Ok((u.dot(v) / (nu * nv)).max(-T::one()).min(T::one()))
}

/// Total variance of the zero-target intervention along `v` relative to
/// that of the rank-1 edit `(a, b)`, for activations with covariance `Σ`:
/// `(‖W_out v‖²·vᵀΣv) / (‖a‖²·bᵀΣb)`.
pub fn variance_ratio<T: Real>(v: &Vector<T>, a: &Vector<T>, b: &Vector<T>, w_out: &Matrix<T>, sigma: &Matrix<T>) -> Result<T> {
    ensure_dim("variance_ratio v", w_out.cols(), v.len())?;
    ensure_dim("variance_ratio a", w_out.rows(), a.len())?;
    ensure_dim("variance_ratio b", w_out.cols(), b.len())?;
    ensure_dim("variance_ratio sigma", w_out.cols(), sigma.rows())?;
    let num = w_out.matvec(v).norm_sq() * v.dot(&sigma.matvec(v));
    let den = a.norm_sq() * b.dot(&sigma.matvec(b));
    if !(den > T::zero()) {
        return Err(Error::Degenerate("rank-1 edit contributes no variance".into()));
    }
    Ok(num / den)
}
