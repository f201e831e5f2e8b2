// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{interchange_accuracy, summarize_fldd, FlipRule};
use super::spread::{projection_spread, ProjectionSpread};
use crate::das::PatchPair;
use crate::error::{Error, Result};
use crate::linalg::{KernelProjector, Matrix, Vector};
use crate::model_zoo::{forward_with_cache, SyntheticPathwayModel};
use crate::patching::{check_unit, InterventionSpec, PatchOutcome, Site};
use crate::scalar::Real;

/// The weights that read `site` downstream: `W_out` for the MLP hidden
/// activation, the unembedding for residual-stream sites.
pub fn site_reader<T: Real>(model: &SyntheticPathwayModel<T>, site: Site) -> &Matrix<T> {
    match site {
        Site::MlpPostAct => &model.mlp.w_out,
        _ => &model.unembed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionMetrics {
    pub fldd_mean: f64,
    pub fldd_median: f64,
    pub interchange_acc: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Runs `make_spec(pair, source_cache)` on every pair and aggregates.
pub fn evaluate_intervention<T, F>(model: &SyntheticPathwayModel<T>, pairs: &[PatchPair<T>], make_spec: F) -> Result<InterventionMetrics>
where
    T: Real,
    F: Fn(&crate::model_zoo::ActivationCache<T>) -> Result<InterventionSpec<T>> + Sync,
{
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation pairs"));
    }
    let outcomes = pairs
        .par_iter()
        .map(|p| {
            let clean = model.forward(&p.base_input)?;
            let source = model.forward(&p.source_input)?;
            let spec = make_spec(&source)?;
            let patched = forward_with_cache(model, &p.base_input, Some(&spec))?;
            PatchOutcome::new(clean.logits, patched.logits)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = summarize_fldd(&outcomes);
    Ok(InterventionMetrics {
        fldd_mean: s.mean,
        fldd_median: s.median,
        interchange_acc: interchange_accuracy(&outcomes, FlipRule::SignFlip)?,
        evaluated: s.evaluated,
        excluded: s.excluded,
    })
}

fn patch_along<T: Real>(model: &SyntheticPathwayModel<T>, pairs: &[PatchPair<T>], site: Site, dir: &Vector<T>) -> Result<InterventionMetrics> {
    evaluate_intervention(model, pairs, |src| InterventionSpec::patch_direction(site, dir, src.get(site).clone()))
}

/// Split of a direction against the kernel of the site reader and the
/// effect of patching along each part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IllusionReport {
    pub site: Site,
    pub norm_null: f64,
    pub norm_row: f64,
    pub fldd_v: f64,
    /// `None` when the direction has no rowspace component.
    pub fldd_row: Option<f64>,
    /// `None` when the direction has no kernel component.
    pub fldd_null: Option<f64>,
    pub fldd_full_component: f64,
    pub interchange_acc_v: f64,
    pub interchange_acc_row: Option<f64>,
    pub interchange_acc_null: Option<f64>,
    pub interchange_acc_full: f64,
    pub spread_null: Option<ProjectionSpread>,
    pub spread_row: Option<ProjectionSpread>,
    pub metrics_v: InterventionMetrics,
    pub metrics_row: Option<InterventionMetrics>,
    pub metrics_null: Option<InterventionMetrics>,
    pub metrics_full: InterventionMetrics,
}

/// Components smaller than this are treated as absent.
const COMPONENT_FLOOR: f64 = 1e-9;

/// Decomposes `v` against the kernel of the site reader, patches along
/// `v`, its normalized rowspace and kernel parts, and the whole activation,
/// and measures class spreads of the parts over the base and source
/// activations of `eval_pairs`.
pub fn analyze_direction<T: Real>(
    model: &SyntheticPathwayModel<T>,
    v: &Vector<T>,
    site: Site,
    eval_pairs: &[PatchPair<T>],
) -> Result<IllusionReport> {
    check_unit(v)?;
    let kp = KernelProjector::new(site_reader(model, site))?;
    let split = kp.split(v)?;
    let (norm_null, norm_row) = (split.null.norm().as_f64(), split.row.norm().as_f64());

    let metrics_v = patch_along(model, eval_pairs, site, v)?;
    let unit = |x: &Vector<T>, n: f64| if n > COMPONENT_FLOOR { x.normalized().ok() } else { None };
    let row_dir = unit(&split.row, norm_row);
    let null_dir = unit(&split.null, norm_null);
    let metrics_row = row_dir.as_ref().map(|d| patch_along(model, eval_pairs, site, d)).transpose()?;
    let metrics_null = null_dir.as_ref().map(|d| patch_along(model, eval_pairs, site, d)).transpose()?;
    let metrics_full = evaluate_intervention(model, eval_pairs, |src| Ok(InterventionSpec::full_replace(site, src.get(site).clone())))?;

    let mut rows = Vec::with_capacity(2 * eval_pairs.len());
    let mut labels = Vec::with_capacity(2 * eval_pairs.len());
    for p in eval_pairs {
        rows.push(model.forward(&p.base_input)?.get(site).clone());
        labels.push(p.base_label);
        rows.push(model.forward(&p.source_input)?.get(site).clone());
        labels.push(p.source_label);
    }
    let acts = Matrix::from_row_vectors(&rows);
    let spread = |d: &Option<Vector<T>>| d.as_ref().map(|d| projection_spread(d, &acts, &labels)).transpose();

    Ok(IllusionReport {
        site,
        norm_null,
        norm_row,
        fldd_v: metrics_v.fldd_mean,
        fldd_row: metrics_row.map(|m| m.fldd_mean),
        fldd_null: metrics_null.map(|m| m.fldd_mean),
        fldd_full_component: metrics_full.fldd_mean,
        interchange_acc_v: metrics_v.interchange_acc,
        interchange_acc_row: metrics_row.map(|m| m.interchange_acc),
        interchange_acc_null: metrics_null.map(|m| m.interchange_acc),
        interchange_acc_full: metrics_full.interchange_acc,
        spread_null: spread(&null_dir)?,
        spread_row: spread(&row_dir)?,
        metrics_v,
        metrics_row,
        metrics_null,
        metrics_full,
    })
}
