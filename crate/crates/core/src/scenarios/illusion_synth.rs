// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::Serialize;

use super::config::ExperimentConfig;
use super::derive_seed;
use super::output::{Check, ScenarioOutput};
use crate::das::{
    das_train_with_trace, make_pairs, make_pairs_with, trace_csv, DasConfig, ObjectiveSignRule, PairMix, PatchPair, TracePoint,
};
use crate::error::Result;
use crate::illusion::{analyze_direction, cosine, site_reader, spread_csv, IllusionReport, InterventionMetrics};
use crate::linalg::{KernelProjector, Matrix, Vector};
use crate::model_zoo::SyntheticPathwayModel;
use crate::patching::Site;
use crate::report::{format_g17, CsvTable};

/// Thresholds of the embedded assertions.
pub const MIN_MLP_FLDD: f64 = 0.8;
pub const MAX_ROW_FRACTION: f64 = 0.25;
pub const MAX_NULL_FLDD: f64 = 1e-6;
pub const MAX_FULL_MLP_FLDD: f64 = 0.15;
pub const MIN_NULL_NORM: f64 = 0.3;
pub const MIN_RESID_COS: f64 = 0.9;
pub const MIN_RESID_ROW_FRACTION: f64 = 0.75;

#[derive(Clone, Debug, Serialize)]
pub struct SiteResult {
    pub site: Site,
    pub direction: Vec<f64>,
    pub cos_with_feature: Option<f64>,
    pub das_initial_loss: f64,
    pub das_final_loss: f64,
    pub report: IllusionReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct IllusionSynthReport {
    pub train_pairs: usize,
    pub eval_pairs: usize,
    pub sites: Vec<SiteResult>,
}

/// Trains DAS at `site` and analyzes the found direction.
pub fn train_and_analyze(
    model: &SyntheticPathwayModel<f64>,
    das: &DasConfig,
    site: Site,
    train: &[PatchPair<f64>],
    eval: &[PatchPair<f64>],
) -> Result<(SiteResult, Vec<TracePoint>)> {
    let cfg = DasConfig { site, ..das.clone() };
    let run = das_train_with_trace(model, train, &cfg)?;
    let v = run.basis.column(0);
    let report = analyze_direction(model, &v, site, eval)?;
    // Only residual-stream sites share a basis with v_feat.
    let cos_with_feature = if model.site_dim(site) == model.d_resid { Some(cosine(&v, &model.v_feat)?.abs()) } else { None };
    Ok((
        SiteResult {
            site,
            direction: v.to_f64(),
            cos_with_feature,
            das_initial_loss: run.initial_mean_loss,
            das_final_loss: run.final_mean_loss,
            report,
        },
        run.trace,
    ))
}

fn push_metrics(t: &mut CsvTable, site: Site, component: &str, norm: Option<f64>, m: Option<&InterventionMetrics>) {
    let cell = |x: Option<f64>| x.map(format_g17).unwrap_or_default();
    t.push_row(vec![
        site.to_string(),
        component.to_string(),
        cell(norm),
        cell(m.map(|m| m.fldd_mean)),
        cell(m.map(|m| m.fldd_median)),
        cell(m.map(|m| m.interchange_acc)),
        m.map(|m| m.evaluated.to_string()).unwrap_or_default(),
        m.map(|m| m.excluded.to_string()).unwrap_or_default(),
    ]);
}

fn split_direction(model: &SyntheticPathwayModel<f64>, site: Site, v: &Vector<f64>) -> Result<(Vector<f64>, Vector<f64>)> {
    let split = KernelProjector::new(site_reader(model, site))?.split(v)?;
    Ok((split.null, split.row))
}

pub fn run_illusion_synth(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let c = config.resolved();
    let model: SyntheticPathwayModel<f64> = c.model.clone().unwrap_or_default().build()?;
    let das = c.das.clone().unwrap_or_default();
    let n_train = c.pair_count.unwrap_or(256);
    let n_eval = c.eval_pair_count.unwrap_or(1000);
    let train = make_pairs(&model, n_train, derive_seed(c.seed, 1))?;
    // FLDD is scored on interchanges that should flip the prediction.
    let eval = make_pairs_with(&model, n_eval, derive_seed(c.seed, 2), PairMix::OppositeOnly, &ObjectiveSignRule::default())?;

    let mut out = ScenarioOutput::default();
    let mut table = CsvTable::new(&[
        "site", "component", "norm", "fldd_mean", "fldd_median", "interchange_acc", "evaluated", "excluded",
    ]);
    let mut sites = Vec::new();
    for site in [Site::MlpPostAct, Site::ResidPre] {
        let (res, trace) = train_and_analyze(&model, &das, site, &train, &eval)?;
        let r = &res.report;
        push_metrics(&mut table, site, "v", Some(1.0), Some(&r.metrics_v));
        push_metrics(&mut table, site, "row", Some(r.norm_row), r.metrics_row.as_ref());
        push_metrics(&mut table, site, "null", Some(r.norm_null), r.metrics_null.as_ref());
        push_metrics(&mut table, site, "full_component", None, Some(&r.metrics_full));
        out.csv(&format!("das_trace_{}.csv", site.name()), &trace_csv(&trace));

        // Projections of base and source activations on the two parts.
        let v = Vector::from_f64(&res.direction);
        let (null, row) = split_direction(&model, site, &v)?;
        let mut rows = Vec::with_capacity(2 * eval.len());
        let mut labels = Vec::with_capacity(2 * eval.len());
        for p in &eval {
            rows.push(model.forward(&p.base_input)?.get(site).clone());
            labels.push(p.base_label);
            rows.push(model.forward(&p.source_input)?.get(site).clone());
            labels.push(p.source_label);
        }
        let acts = Matrix::from_row_vectors(&rows);
        for (part, vec) in [("null", null), ("row", row)] {
            if let Ok(dir) = vec.normalized() {
                if vec.norm() > 1e-9 {
                    out.csv(&format!("spread_{}_{part}.csv", site.name()), &spread_csv(&dir, &acts, &labels)?);
                }
            }
        }
        sites.push(res);
    }
    out.csv("illusion_table.csv", &table);

    let mlp = &sites[0].report;
    let fldd_row = mlp.fldd_row.unwrap_or(0.0);
    out.check(Check::new("mlp_fldd_v", mlp.fldd_v >= MIN_MLP_FLDD, format!("FLDD(v) = {:.4} (need >= {MIN_MLP_FLDD})", mlp.fldd_v)));
    out.check(Check::new(
        "mlp_row_fraction",
        fldd_row <= MAX_ROW_FRACTION * mlp.fldd_v,
        format!("FLDD(row) = {fldd_row:.4}, {:.1}% of FLDD(v) (need <= {:.0}%)", 100.0 * fldd_row / mlp.fldd_v, 100.0 * MAX_ROW_FRACTION),
    ));
    let fldd_null = mlp.fldd_null.unwrap_or(0.0);
    out.check(Check::new("mlp_null_fldd", fldd_null.abs() < MAX_NULL_FLDD, format!("|FLDD(null)| = {:e}", fldd_null.abs())));
    out.check(Check::new(
        "mlp_full_patch",
        mlp.fldd_full_component.abs() < MAX_FULL_MLP_FLDD,
        format!("|FLDD(full MLP)| = {:.4}", mlp.fldd_full_component.abs()),
    ));
    out.check(Check::new("mlp_null_norm", mlp.norm_null >= MIN_NULL_NORM, format!("nullspace norm = {:.4}", mlp.norm_null)));

    let resid = &sites[1];
    let rr = &resid.report;
    let resid_row = rr.fldd_row.unwrap_or(0.0);
    out.check(Check::new(
        "resid_recovers_feature",
        resid.cos_with_feature.is_some_and(|c| c >= MIN_RESID_COS),
        format!("|cos(v, v_feat)| = {:.4}", resid.cos_with_feature.unwrap_or(f64::NAN)),
    ));
    out.check(Check::new(
        "resid_row_retains",
        resid_row >= MIN_RESID_ROW_FRACTION * rr.fldd_v,
        format!("FLDD(row) = {resid_row:.4} vs FLDD(v) = {:.4}", rr.fldd_v),
    ));
    out.json("illusion_report.json", &IllusionSynthReport { train_pairs: n_train, eval_pairs: n_eval, sites })?;
    Ok(out)
}
