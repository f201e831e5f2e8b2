// SPDX-License-Identifier: MIT OR Apache-2.0

use patchlab::linalg::{Matrix, Vector};
use patchlab::model_zoo::{SyntheticConfig, SyntheticPathwayModel};
use patchlab::random::{gaussian_matrix, gaussian_vector, normal, orthogonal_matrix, rng};
use patchlab::separability::{
    distortion_fit, lemma_separability_check_with, logistic_probe, residual_projection_regression, ridge_regression,
    ridge_regression_multi, sample_quadruple_products,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scalar_ridge_matches_closed_form(seed in 0u64..100_000, lambda in 0.0f64..5.0) {
        let mut g = rng(seed);
        let x: Vec<f64> = (0..30).map(|_| normal(&mut g)).collect();
        let y: Vec<f64> = x.iter().map(|xi| 1.5 * xi + 0.3 + 0.2 * normal::<f64>(&mut g)).collect();
        let f = ridge_regression(&x, &y, lambda).unwrap();
        let (mx, my) = (x.iter().sum::<f64>() / 30.0, y.iter().sum::<f64>() / 30.0);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / (sxx + lambda);
        prop_assert!((f.slope - slope).abs() < 1e-12);
        prop_assert!((f.intercept - (my - slope * mx)).abs() < 1e-12);
    }

    #[test]
    fn isometry_keeps_separability(seed in 0u64..100_000, lambda in 0.05f64..10.0) {
        let mut g = rng(seed);
        let n = 24;
        let labels: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let pts = Matrix::from_fn(n, 3, |i, j| if j == 0 { 2.0 * labels[i] as f64 } else { 0.0 } + 0.5 * normal::<f64>(&mut g));
        let q: Matrix<f64> = orthogonal_matrix(&mut g, 3);
        let t: Vector<f64> = gaussian_vector(&mut g, 3, 10.0);
        let r = lemma_separability_check_with(&pts, &labels, lambda, &q, &t).unwrap();
        prop_assert!(r.all_correct);
        prop_assert!(r.gap_bound_holds);
        prop_assert!(r.alpha_sum.abs() < 1e-9);
    }
}

#[test]
fn multi_ridge_recovers_known_plane() {
    let mut g = rng(3);
    let x: Matrix<f64> = gaussian_matrix(&mut g, 200, 4, 1.0);
    let beta = Vector::from_f64(&[1.0, -2.0, 0.5, 0.0]);
    let y: Vec<f64> = (0..200).map(|i| x.row_vector(i).dot(&beta) + 3.0).collect();
    let (b, c) = ridge_regression_multi(&x, &y, 0.0).unwrap();
    assert!(b.sub(&beta).max_abs() < 1e-10 && (c - 3.0).abs() < 1e-10);
}

#[test]
fn distortion_of_exact_isometry() {
    let mut g = rng(4);
    let x: Matrix<f64> = gaussian_matrix(&mut g, 300, 8, 1.0);
    let q: Matrix<f64> = orthogonal_matrix(&mut g, 8);
    let lambda: f64 = 2.5;
    let z = x.matmul(&q.transpose()).scale(lambda.sqrt());
    let f = distortion_fit(&x, &z, 250, 1).unwrap();
    assert!((f.slope - lambda).abs() < 1e-8 && f.intercept.abs() < 1e-8 && (f.r_squared - 1.0).abs() < 1e-8);
}

#[test]
fn quadruples_are_distinct_for_default_sizes() {
    let x: Matrix<f64> = gaussian_matrix(&mut rng(9), 256, 3, 1.0);
    let qs = sample_quadruple_products(&x, &x, 250, 0).unwrap();
    let mut idx: Vec<[usize; 4]> = qs.iter().map(|q| q.indices).collect();
    idx.sort();
    idx.dedup();
    assert_eq!(idx.len(), 250);
}

#[test]
fn probe_separates_shifted_classes() {
    let mut g = rng(6);
    let labels: Vec<i8> = (0..400).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let x = Matrix::from_fn(400, 5, |i, j| if j == 2 { labels[i] as f64 } else { 0.0 } + 0.3 * normal::<f64>(&mut g));
    assert!(logistic_probe(&x, &labels, 1e-3, 500, 0.1, 1).unwrap().accuracy > 0.95);
}

#[test]
fn residual_feature_is_linearly_recoverable() {
    let m: SyntheticPathwayModel<f64> = SyntheticConfig { d_resid: 16, d_mlp: 64, ..Default::default() }.build().unwrap();
    let f = residual_projection_regression(&m, &m.v_feat, 600, 1e-3, 2).unwrap();
    assert!(f.r_squared > 0.95, "{f:?}");
    assert!(residual_projection_regression(&m, &m.v_feat, 10, 1e-3, 2).is_err());
}
