// SPDX-License-Identifier: MIT OR Apache-2.0

use patchlab::illusion::cosine;
use patchlab::linalg::{Matrix, Vector};
use patchlab::random::{gaussian_matrix, gaussian_vector, rng};
use patchlab::rome::{edit_to_subspace, patch_to_edit, rome_edit, RomeRequest, DEFAULT_ALPHA_SQ_GRID};
use proptest::prelude::*;

fn spd(seed: u64, n: usize) -> Matrix<f64> {
    let l: Matrix<f64> = gaussian_matrix(&mut rng(seed), n, n, 1.0);
    l.tr_matmul(&l).add(&Matrix::identity(n).scale(0.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rome_edit_writes_the_value(seed in 0u64..100_000, d_in in 2usize..10, d_out in 1usize..6) {
        let mut g = rng(seed);
        let w: Matrix<f64> = gaussian_matrix(&mut g, d_out, d_in, 1.0);
        let k: Vector<f64> = gaussian_vector(&mut g, d_in, 1.0);
        let v: Vector<f64> = gaussian_vector(&mut g, d_out, 1.0);
        let e = rome_edit(&w, &RomeRequest { k: k.clone(), v_target: v.clone(), sigma: spd(seed + 1, d_in) }).unwrap();
        prop_assert!(e.apply(&w).unwrap().matvec(&k).sub(&v).max_abs() < 1e-9 * (1.0 + v.max_abs()));
        prop_assert!((e.b.dot(&k) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn patch_to_edit_matches_patched_output(seed in 0u64..100_000, d_in in 2usize..10, d_out in 1usize..6) {
        let mut g = rng(seed);
        let w: Matrix<f64> = gaussian_matrix(&mut g, d_out, d_in, 1.0);
        let ua: Vector<f64> = gaussian_vector(&mut g, d_in, 1.0);
        let ub: Vector<f64> = gaussian_vector(&mut g, d_in, 1.0);
        let v = gaussian_vector::<f64>(&mut g, d_in, 1.0).normalized().unwrap();
        let e = patch_to_edit(&ua, &ub, &v, &w, &spd(seed + 2, d_in)).unwrap();
        // Oracle: the patched activation written out by hand.
        let patched = ua.plus_scaled(ub.sub(&ua).dot(&v), &v);
        prop_assert!(e.apply(&w).unwrap().matvec(&ua).sub(&w.matvec(&patched)).max_abs() < 1e-9);
    }
}

#[test]
fn exact_construction_is_recovered() {
    let mut g = rng(5);
    let w: Matrix<f64> = gaussian_matrix(&mut g, 5, 15, 1.0);
    let sigma = spd(6, 15);
    for _ in 0..10 {
        let v0: Vector<f64> = gaussian_vector(&mut g, 15, 1.0);
        let r = edit_to_subspace(&w.matvec(&v0), &v0.scale(-1.0), &w, &sigma, &DEFAULT_ALPHA_SQ_GRID).unwrap();
        assert!(cosine(&r.v, &v0).unwrap().abs() > 0.99);
        assert!(r.objective_value.abs() < 1e-6);
        assert_eq!(r.curve.len(), DEFAULT_ALPHA_SQ_GRID.len());
    }
}

#[test]
fn singular_covariance_points_to_the_ridge() {
    let w = Matrix::<f64>::identity(2);
    let sigma = Matrix::from_f64_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
    let err = rome_edit(&w, &RomeRequest { k: Vector::from_f64(&[1.0, 0.0]), v_target: Vector::from_f64(&[0.0, 1.0]), sigma }).unwrap_err();
    assert!(err.to_string().contains("ridge"), "{err}");
}

#[test]
fn empty_grid_is_rejected() {
    let w = Matrix::<f64>::identity(2);
    let a = Vector::from_f64(&[1.0, 0.0]);
    assert!(edit_to_subspace(&a, &a, &w, &w, &[]).is_err());
}
