// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::derive_seed;
use super::output::{Check, ScenarioOutput};
use crate::das::make_pairs;
use crate::error::Result;
use crate::illusion::{cosine, variance_ratio};
use crate::linalg::{activation_covariance, Cholesky, Matrix, Vector};
use crate::model_zoo::{sample_example, SyntheticPathwayModel};
use crate::patching::patch_1d;
use crate::random::{gaussian_matrix, gaussian_vector, normal, rng, sign, substream, unit_vector};
use crate::report::{format_g17, CsvTable};
use crate::rome::{edit_to_subspace, edit_vs_patch_model_comparison, patch_to_edit, rome_edit, RomeRequest};

/// Output and input widths of the random linear layers.
pub const D_OUT: usize = 8;
pub const D_IN: usize = 24;
/// Number of instances whose α curve is checked by Monte Carlo.
pub const MONTE_CARLO_INSTANCES: usize = 5;
/// Activations used for the model covariance.
pub const COVARIANCE_SAMPLES: usize = 2000;

pub const CONSTRAINT_TOL: f64 = 1e-8;
pub const KKT_ANGLE_TOL: f64 = 1e-8;
pub const PATCH_EDIT_TOL: f64 = 1e-9;
pub const EXACT_COS_MIN: f64 = 0.99;
pub const EXACT_OBJECTIVE_TOL: f64 = 1e-6;
pub const MONTE_CARLO_TOL: f64 = 0.02;
pub const ROUND_TRIP_COS_MIN: f64 = 0.95;

/// A random `D_OUT × D_IN` weight and a well-conditioned SPD covariance.
pub fn random_layer(seed: u64) -> (Matrix<f64>, Matrix<f64>) {
    let mut g = substream(seed, 0);
    let w = gaussian_matrix(&mut g, D_OUT, D_IN, 1.0 / (D_IN as f64).sqrt());
    let l: Matrix<f64> = gaussian_matrix(&mut g, D_IN, D_IN, 1.0 / (D_IN as f64).sqrt());
    let sigma = l.tr_matmul(&l).add(&Matrix::identity(D_IN).scale(0.1));
    (w, sigma)
}

#[derive(Clone, Debug, Serialize)]
pub struct RomeInstance {
    pub seed: u64,
    pub constraint_rel_error: f64,
    pub perturbation_violations: usize,
    /// Smallest `b'ᵀΣb' − bᵀΣb` over the sampled feasible `b'`.
    pub min_excess_variance: f64,
    pub kkt_angle: f64,
}

/// Closed-form ROME edit on a random instance, checked against the key
/// constraint, sampled feasible alternatives, and the stationarity form.
pub fn rome_instance(seed: u64, perturbations: usize) -> Result<RomeInstance> {
    let (w, sigma) = random_layer(seed);
    let mut g = substream(seed, 1);
    let k: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
    let v_target: Vector<f64> = gaussian_vector(&mut g, D_OUT, 1.0);
    let edit = rome_edit(&w, &RomeRequest { k: k.clone(), v_target: v_target.clone(), sigma: sigma.clone() })?;
    let w2 = edit.apply(&w)?;
    let constraint_rel_error = w2.matvec(&k).sub(&v_target).norm() / v_target.norm();

    let b = &edit.b;
    let base = b.dot(&sigma.matvec(b));
    let k_hat = k.normalized()?;
    let mut violations = 0;
    let mut min_excess = f64::INFINITY;
    for _ in 0..perturbations {
        let xi: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
        let delta = xi.plus_scaled(-xi.dot(&k_hat), &k_hat);
        let scale = b.norm() * (2.0 * normal::<f64>(&mut g)).exp();
        let b2 = b.plus_scaled(scale / delta.norm(), &delta);
        let var = b2.dot(&sigma.matvec(&b2));
        min_excess = min_excess.min(var - base);
        if var < base * (1.0 - 1e-12) {
            violations += 1;
        }
    }
    let sb = sigma.matvec(b);
    let along = sb.dot(&k_hat);
    let rejection = sb.plus_scaled(-along, &k_hat).norm();
    Ok(RomeInstance {
        seed,
        constraint_rel_error,
        perturbation_violations: violations,
        min_excess_variance: min_excess,
        kkt_angle: rejection.atan2(along.abs()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchEditInstance {
    pub seed: u64,
    pub output_rel_error: f64,
}

/// `W' u_A` against `W` applied to the patched activation.
pub fn patch_edit_instance(seed: u64) -> Result<PatchEditInstance> {
    let (w, sigma) = random_layer(seed);
    let mut g = substream(seed, 2);
    let u_a: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
    let u_b: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
    let v: Vector<f64> = unit_vector(&mut g, D_IN);
    let edit = patch_to_edit(&u_a, &u_b, &v, &w, &sigma)?;
    let via_edit = edit.apply(&w)?.matvec(&u_a);
    let via_patch = w.matvec(&patch_1d(&u_a, &u_b, &v)?);
    Ok(PatchEditInstance { seed, output_rel_error: via_edit.sub(&via_patch).norm() / via_patch.norm().max(f64::MIN_POSITIVE) })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactRecovery {
    pub seed: u64,
    pub abs_cos: f64,
    pub objective: f64,
    pub alpha_sq: f64,
}

/// Builds an edit that is exactly a zero-target intervention along `v₀`
/// (`a = W v₀`, `b = −v₀`) and asks the solver to find `v₀` again.
pub fn exact_recovery_instance(seed: u64, grid: &[f64]) -> Result<ExactRecovery> {
    let (w, sigma) = random_layer(seed);
    let mut g = substream(seed, 3);
    let v0: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
    let r = edit_to_subspace(&w.matvec(&v0), &v0.scale(-1.0), &w, &sigma, grid)?;
    Ok(ExactRecovery { seed, abs_cos: cosine(&r.v, &v0)?.abs(), objective: r.objective_value, alpha_sq: r.alpha_sq })
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub alpha_sq: f64,
    pub objective: f64,
    pub reduced_objective: f64,
    pub monte_carlo: Option<f64>,
    pub monte_carlo_rel_error: Option<f64>,
    pub cos_with_b: f64,
    pub variance_ratio: f64,
    pub constraint_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaCurve {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

/// The α curve of a random ROME edit; with `mc_samples`, each objective is
/// compared with the sampled variance of the difference between the edit's
/// and the intervention's contributions.
pub fn alpha_curve_instance(seed: u64, grid: &[f64], mc_samples: Option<usize>) -> Result<AlphaCurve> {
    let (w, sigma) = random_layer(seed);
    let mut g = substream(seed, 4);
    let k: Vector<f64> = gaussian_vector(&mut g, D_IN, 1.0);
    let v_target: Vector<f64> = gaussian_vector(&mut g, D_OUT, 1.0);
    let edit = rome_edit(&w, &RomeRequest { k, v_target, sigma: sigma.clone() })?;
    let chol = Cholesky::factor(&sigma)?;
    let full = edit_to_subspace(&edit.a, &edit.b, &w, &sigma, grid)?;
    let mut points = Vec::with_capacity(grid.len());
    for (p, &s) in full.curve.iter().zip(grid) {
        let v = edit_to_subspace(&edit.a, &edit.b, &w, &sigma, &[s])?.v;
        let monte_carlo = mc_samples.map(|n| {
            let wv = w.matvec(&v);
            let mut mc = substream(seed, 5);
            let mut total = 0.0;
            for _ in 0..n {
                let x = chol.mul_l(&gaussian_vector(&mut mc, D_IN, 1.0));
                total += edit.a.scale(edit.b.dot(&x)).plus_scaled(v.dot(&x), &wv).norm_sq();
            }
            total / n as f64
        });
        points.push(CurvePoint {
            alpha_sq: s,
            objective: p.objective,
            reduced_objective: p.reduced_objective,
            monte_carlo,
            monte_carlo_rel_error: monte_carlo.map(|m| (m - p.objective).abs() / p.objective.abs().max(f64::MIN_POSITIVE)),
            cos_with_b: p.cos_with_b,
            variance_ratio: variance_ratio(&v, &edit.a, &edit.b, &w, &sigma)?,
            constraint_violation: p.constraint_violation,
        });
    }
    Ok(AlphaCurve { seed, points })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelPairMetrics {
    pub pair: usize,
    /// Largest logit gap between the patched and the edited run, relative
    /// to the clean logit scale.
    pub logit_rel_diff: f64,
    /// `|cos(v', v)|` after converting the edit back into a direction.
    pub round_trip_abs_cos: f64,
    /// `|cos(W v', W v)|`.
    pub round_trip_image_cos: f64,
}

/// Uncentered covariance of `mlp_post_act` over fresh model samples.
pub fn model_covariance(model: &SyntheticPathwayModel<f64>, n: usize, seed: u64) -> Result<Matrix<f64>> {
    let mut g = rng(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let label = sign(&mut g);
        let u = sample_example(model, label, g.random())?;
        rows.push(model.mlp.post_activation(&u));
    }
    activation_covariance(&Matrix::from_row_vectors(&rows))
}

pub fn model_pair_suite(model: &SyntheticPathwayModel<f64>, pair_count: usize, grid: &[f64], seed: u64) -> Result<Vec<ModelPairMetrics>> {
    let sigma = model_covariance(model, COVARIANCE_SAMPLES, derive_seed(seed, 10))?;
    let pairs = make_pairs(model, pair_count, derive_seed(seed, 11))?;
    let mut g = rng(derive_seed(seed, 12));
    let v: Vector<f64> = unit_vector(&mut g, model.d_mlp());
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let cmp = edit_vs_patch_model_comparison(model, p, &v, &sigma)?;
            let scale = cmp.clean_logits.max_abs().max(1.0);
            let back = edit_to_subspace(&cmp.edit.a, &cmp.edit.b, &model.mlp.w_out, &sigma, grid)?;
            Ok(ModelPairMetrics {
                pair: i,
                logit_rel_diff: cmp.logits_under_patch.sub(&cmp.logits_under_edit).max_abs() / scale,
                round_trip_abs_cos: cosine(&back.v, &v)?.abs(),
                round_trip_image_cos: cosine(&model.mlp.w_out.matvec(&back.v), &model.mlp.w_out.matvec(&v))?.abs(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RomeRoundtripReport {
    pub rome: Vec<RomeInstance>,
    pub patch_to_edit: Vec<PatchEditInstance>,
    pub exact_recovery: Vec<ExactRecovery>,
    pub alpha_curves: Vec<AlphaCurve>,
    pub model_pairs: Vec<ModelPairMetrics>,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

pub fn run_rome_roundtrip(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let c = config.resolved();
    let grid = c.alpha_sq_grid.clone().unwrap_or_default();
    let n = c.instance_count.unwrap_or(50);
    let perturbations = c.perturbation_count.unwrap_or(1000);
    let mc = c.monte_carlo_samples.unwrap_or(100_000);
    let seeds: Vec<u64> = (0..n as u64).map(|i| derive_seed(c.seed, 100 + i)).collect();

    let rome: Vec<_> = seeds.par_iter().map(|&s| rome_instance(s, perturbations)).collect::<Result<_>>()?;
    let pte: Vec<_> = seeds.par_iter().map(|&s| patch_edit_instance(s)).collect::<Result<_>>()?;
    let exact: Vec<_> = seeds.par_iter().map(|&s| exact_recovery_instance(s, &grid)).collect::<Result<_>>()?;
    let curves: Vec<_> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| alpha_curve_instance(s, &grid, (i < MONTE_CARLO_INSTANCES).then_some(mc)))
        .collect::<Result<_>>()?;
    let model: SyntheticPathwayModel<f64> = c.model.clone().unwrap_or_default().build()?;
    let pairs = model_pair_suite(&model, c.pair_count.unwrap_or(20), &grid, c.seed)?;

    let mut out = ScenarioOutput::default();
    let worst_constraint = max_of(rome.iter().map(|r| r.constraint_rel_error));
    out.check(Check::new("rome_constraint", worst_constraint <= CONSTRAINT_TOL, format!("max relative |W'k - v| = {worst_constraint:e} over {n} instances")));
    let violations: usize = rome.iter().map(|r| r.perturbation_violations).sum();
    out.check(Check::new("rome_optimality", violations == 0, format!("{violations} violations among {} feasible perturbations", n * perturbations)));
    let worst_angle = max_of(rome.iter().map(|r| r.kkt_angle));
    out.check(Check::new("rome_kkt_parallel", worst_angle <= KKT_ANGLE_TOL, format!("max angle(Σb, k) = {worst_angle:e} rad")));
    let worst_pte = max_of(pte.iter().map(|r| r.output_rel_error));
    out.check(Check::new("patch_to_edit_equality", worst_pte <= PATCH_EDIT_TOL, format!("max relative output gap = {worst_pte:e}")));
    let worst_logit = max_of(pairs.iter().map(|p| p.logit_rel_diff));
    out.check(Check::new("model_logit_agreement", worst_logit <= PATCH_EDIT_TOL, format!("max relative logit gap = {worst_logit:e} over {} pairs", pairs.len())));
    let cos: Vec<f64> = exact.iter().map(|e| e.abs_cos).collect();
    out.check(Check::new("exact_recovery_cos", median(&cos) >= EXACT_COS_MIN, format!("median |cos(v, v0)| = {:.9}", median(&cos))));
    let worst_obj = max_of(exact.iter().map(|e| e.objective.abs()));
    out.check(Check::new("exact_recovery_objective", worst_obj <= EXACT_OBJECTIVE_TOL, format!("max objective = {worst_obj:e}")));
    let worst_mc = max_of(curves.iter().flat_map(|c| c.points.iter().filter_map(|p| p.monte_carlo_rel_error)));
    out.check(Check::new("objective_vs_monte_carlo", worst_mc <= MONTE_CARLO_TOL, format!("max relative gap = {:.4}% ({mc} samples)", 100.0 * worst_mc)));
    let worst_image = pairs.iter().map(|p| p.round_trip_image_cos).fold(1.0, f64::min);
    out.check(Check::new("round_trip_image_parallel", worst_image >= 1.0 - 1e-9, format!("min |cos(W v', W v)| = {worst_image:.12}")));
    let rt: Vec<f64> = pairs.iter().map(|p| p.round_trip_abs_cos).collect();
    out.check(Check::advisory(
        "round_trip_direction",
        median(&rt) >= ROUND_TRIP_COS_MIN,
        format!(
            "median |cos(v', v)| = {:.4}; the induced b depends only on u_A and the kernel part of v leaves no trace in (a, b)",
            median(&rt)
        ),
    ));

    let mut table = CsvTable::new(&["instance", "alpha_sq", "objective", "reduced_objective", "monte_carlo", "cos_with_b", "variance_ratio"]);
    for (i, curve) in curves.iter().enumerate() {
        for p in &curve.points {
            table.push_row(vec![
                i.to_string(),
                format_g17(p.alpha_sq),
                format_g17(p.objective),
                format_g17(p.reduced_objective),
                p.monte_carlo.map(format_g17).unwrap_or_default(),
                format_g17(p.cos_with_b),
                format_g17(p.variance_ratio),
            ]);
        }
    }
    out.csv("alpha_curves.csv", &table);
    out.json(
        "rome_roundtrip.json",
        &RomeRoundtripReport { rome, patch_to_edit: pte, exact_recovery: exact, alpha_curves: curves, model_pairs: pairs },
    )?;
    Ok(out)
}
