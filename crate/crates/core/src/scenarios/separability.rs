// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::derive_seed;
use super::output::{Check, ScenarioOutput};
use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::model_zoo::SyntheticPathwayModel;
use crate::random::{gaussian_matrix, gaussian_vector, normal, orthogonal_matrix, substream, unit_vector};
use crate::report::{format_g17, CsvTable};
use crate::separability::{
    distortion_fit, distortion_regression, injected_direction_experiment, lemma_separability_check,
    residual_projection_regression, sample_quadruple_products, ProbeResult, RegressionFit, SeparabilityCheck,
    DEFAULT_RIDGE,
};

/// Published probe accuracies for the injected-direction experiment, shown
/// next to ours for side-by-side reading only.
pub const REFERENCE_ACCURACY: [(f64, f64); 4] = [(1e-4, 0.69), (1e-3, 0.83), (1e-2, 0.87), (1e-1, 0.996)];

pub const ISOMETRY_TOL: f64 = 1e-8;
pub const QUADRUPLE_EXAMPLES: usize = 256;
pub const QUADRUPLE_SAMPLES: usize = 250;
pub const REGRESSION_EXAMPLES: usize = 1000;
pub const LEMMA_POINTS: usize = 60;
pub const LEMMA_DIM: usize = 5;

fn reference_for(z: f64) -> Option<f64> {
    REFERENCE_ACCURACY.iter().find(|(rz, _)| (rz - z).abs() <= 1e-12 * rz.abs().max(1e-300)).map(|p| p.1)
}

/// Number of adjacent decreases in a sequence.
pub fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Exact `√λ`-scaled isometry `z = √λ Q x + t` on Gaussian points; the
/// distortion fit must recover slope `λ`, zero intercept and `r² = 1`.
pub fn isometry_self_test(lambda: f64, seed: u64) -> Result<RegressionFit> {
    let mut g = substream(seed, 0);
    let d = 16;
    let x: Matrix<f64> = gaussian_matrix(&mut g, QUADRUPLE_EXAMPLES, d, 1.0);
    let q: Matrix<f64> = orthogonal_matrix(&mut g, d);
    let t: Vector<f64> = gaussian_vector(&mut g, d, 3.0);
    let z = Matrix::from_fn(x.rows(), d, |i, j| {
        let row = x.row_vector(i);
        lambda.sqrt() * q.row_vector(j).dot(&row) + t[j]
    });
    distortion_fit(&x, &z, QUADRUPLE_SAMPLES, derive_seed(seed, 1))
}

/// A random linearly separable dataset with margin: Gaussian points pushed
/// half a unit away from a random hyperplane through the origin.
pub fn separable_dataset(seed: u64, n: usize, d: usize) -> (Matrix<f64>, Vec<i8>) {
    let mut g = substream(seed, 0);
    let w: Vector<f64> = unit_vector(&mut g, d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vector<f64> = gaussian_vector(&mut g, d, 1.0);
        // Alternate classes so both are always present.
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let shift = y as f64 * (0.5 + x.dot(&w).abs()) - x.dot(&w);
        rows.push(x.plus_scaled(shift, &w));
        labels.push(y);
    }
    (Matrix::from_row_vectors(&rows), labels)
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaRow {
    pub dataset: usize,
    pub check: SeparabilityCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparabilityReport {
    pub probes: Vec<ProbeResult>,
    pub regressions: Vec<(String, RegressionFit)>,
    pub lemma: Vec<LemmaRow>,
    pub distinct_quadruples: usize,
}

pub fn run_separability(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let c = config.resolved();
    let model: SyntheticPathwayModel<f64> = c.model.clone().unwrap_or_default().build()?;
    let z_values = c.z_values.clone().unwrap_or_default();
    let lambda = c.isometry_lambda.unwrap_or(0.37);

    let probes = injected_direction_experiment(&model, &z_values, c.n_per_z.unwrap_or(2000), derive_seed(c.seed, 1))?;
    let mut probe_table = CsvTable::new(&["z", "accuracy", "seed", "reference_accuracy"]);
    for p in &probes {
        probe_table.push_row(vec![
            format_g17(p.z),
            format_g17(p.accuracy),
            p.seed.to_string(),
            reference_for(p.z).map(format_g17).unwrap_or_default(),
        ]);
    }

    let mut regressions = vec![
        ("isometry_self_test".to_string(), isometry_self_test(lambda, derive_seed(c.seed, 2))?),
        (
            "mlp_kernel".to_string(),
            distortion_regression(&model, QUADRUPLE_EXAMPLES * 2, QUADRUPLE_SAMPLES, derive_seed(c.seed, 3))?,
        ),
    ];
    let mut g = substream(c.seed, 4);
    let n_dirs = c.direction_count.unwrap_or(4);
    let mut dirs = vec![("resid_feature".to_string(), model.v_feat.clone())];
    for k in 1..n_dirs {
        dirs.push((format!("resid_random_{k}"), unit_vector(&mut g, model.d_resid)));
    }
    let fits: Vec<RegressionFit> = dirs
        .par_iter()
        .enumerate()
        .map(|(k, (_, d))| residual_projection_regression(&model, d, REGRESSION_EXAMPLES, DEFAULT_RIDGE, derive_seed(c.seed, 50 + k as u64)))
        .collect::<Result<_>>()?;
    regressions.extend(dirs.into_iter().map(|(n, _)| n).zip(fits));
    let mut reg_table = CsvTable::new(&["tag", "slope", "intercept", "r_squared", "n"]);
    for (tag, f) in &regressions {
        reg_table.push_row(vec![tag.clone(), format_g17(f.slope), format_g17(f.intercept), format_g17(f.r_squared), f.n.to_string()]);
    }

    let lemma: Vec<LemmaRow> = (0..c.dataset_count.unwrap_or(20))
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(c.seed, 1000 + i as u64);
            let (pts, labels) = separable_dataset(s, LEMMA_POINTS, LEMMA_DIM);
            let mut g = substream(s, 1);
            let lam = (normal::<f64>(&mut g)).exp();
            Ok(LemmaRow { dataset: i, check: lemma_separability_check(&pts, &labels, lam, derive_seed(s, 2))? })
        })
        .collect::<Result<_>>()?;
    let mut lemma_table = CsvTable::new(&["dataset", "lambda", "support_size", "alpha_sum", "big_m", "small_m", "gap_bound", "n_correct", "n_points"]);
    for r in &lemma {
        let k = &r.check;
        lemma_table.push_row(vec![
            r.dataset.to_string(),
            format_g17(k.lambda),
            k.support_size.to_string(),
            format_g17(k.alpha_sum),
            format_g17(k.big_m),
            format_g17(k.small_m),
            format_g17(2.0 * k.lambda),
            k.n_correct.to_string(),
            k.n_points.to_string(),
        ]);
    }

    // Repeated quadruples would make the distortion samples dependent.
    let x: Matrix<f64> = gaussian_matrix(&mut substream(c.seed, 5), QUADRUPLE_EXAMPLES, 4, 1.0);
    let quads = sample_quadruple_products(&x, &x, QUADRUPLE_SAMPLES, derive_seed(c.seed, 6))?;
    let distinct = quads.iter().map(|q| q.indices).collect::<BTreeSet<_>>().len();

    let mut out = ScenarioOutput::default();
    let iso = &regressions[0].1;
    out.check(Check::new(
        "isometry_slope",
        (iso.slope - lambda).abs() < ISOMETRY_TOL && iso.intercept.abs() < ISOMETRY_TOL,
        format!("slope {:.12} (lambda {lambda}), intercept {:e}", iso.slope, iso.intercept),
    ));
    out.check(Check::new("isometry_r_squared", (iso.r_squared - 1.0).abs() < ISOMETRY_TOL, format!("r^2 = {:.15}", iso.r_squared)));
    let correct = lemma.iter().filter(|r| r.check.all_correct && r.check.gap_bound_holds).count();
    out.check(Check::new(
        "lemma_classifies_all",
        correct == lemma.len(),
        format!("{correct}/{} datasets fully classified with M - m >= 2 lambda", lemma.len()),
    ));
    let acc: Vec<f64> = probes.iter().map(|p| p.accuracy).collect();
    let inv = inversions(&acc);
    out.check(Check::new("probe_accuracy_monotone", inv <= 1, format!("accuracies {acc:?}, {inv} inversion(s)")));
    out.check(Check::new(
        "quadruples_distinct",
        distinct == quads.len(),
        format!("{distinct} distinct of {} sampled quadruples", quads.len()),
    ));

    out.csv("probe_accuracy.csv", &probe_table);
    out.csv("regression.csv", &reg_table);
    out.csv("lemma.csv", &lemma_table);
    out.json("separability_report.json", &SeparabilityReport { probes, regressions, lemma, distinct_quadruples: distinct })?;
    Ok(out)
}
