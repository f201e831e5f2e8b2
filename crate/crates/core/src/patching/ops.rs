// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation and weight transformations. None of these know about models;
//! binding to a forward pass happens in the model zoo.

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{KernelProjector, Matrix, Vector};
use crate::scalar::Real;

/// Tolerance on `‖v‖ = 1` and `VᵀV = I` for patch directions.
pub const UNIT_TOL: f64 = 1e-10;

pub(crate) fn check_unit<T: Real>(v: &Vector<T>) -> Result<()> {
    let n = v.norm();
    if !n.is_finite() || (n - T::one()).abs() > T::lit(UNIT_TOL) {
        return Err(Error::NotUnitNorm(n.as_f64()));
    }
    Ok(())
}

pub(crate) fn check_orthonormal<T: Real>(basis: &Matrix<T>) -> Result<()> {
    if basis.cols() == 0 {
        return Ok(());
    }
    let defect = basis.orthonormality_defect();
    if !(defect <= T::lit(UNIT_TOL)) {
        return Err(Error::NotOrthonormal(defect.as_f64()));
    }
    Ok(())
}

/// One-dimensional interchange: replaces the component of `act_base`
/// along the unit direction `v` with that of `act_source`.
pub fn patch_1d<T: Real>(act_base: &Vector<T>, act_source: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>> {
    ensure_dim("patch source", act_base.len(), act_source.len())?;
    ensure_dim("patch direction", act_base.len(), v.len())?;
    check_unit(v)?;
    let gap = v.dot(act_source) - v.dot(act_base);
    Ok(act_base.plus_scaled(gap, v))
}

/// `(I − VVᵀ)·base + VVᵀ·source` for orthonormal columns `V`.
pub fn patch_kd<T: Real>(act_base: &Vector<T>, act_source: &Vector<T>, basis: &Matrix<T>) -> Result<Vector<T>> {
    ensure_dim("patch source", act_base.len(), act_source.len())?;
    ensure_dim("patch basis rows", act_base.len(), basis.rows())?;
    check_orthonormal(basis)?;
    let delta = act_source.sub(act_base);
    let coeffs = basis.tr_matvec(&delta);
    Ok(act_base.add(&basis.matvec(&coeffs)))
}

/// `x − (vᵀx)·v`. The direction is not normalized; for `‖v‖ ≠ 1` this is
/// not a projector.
pub fn zero_subspace_intervention<T: Real>(x: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>> {
    ensure_dim("zero-subspace direction", x.len(), v.len())?;
    Ok(x.plus_scaled(-v.dot(x), v))
}

/// `W + a bᵀ`.
pub fn apply_rank1_edit<T: Real>(w: &Matrix<T>, a: &Vector<T>, b: &Vector<T>) -> Result<Matrix<T>> {
    ensure_dim("rank-1 edit a", w.rows(), a.len())?;
    ensure_dim("rank-1 edit b", w.cols(), b.len())?;
    Ok(w.add(&Matrix::outer(a, b)))
}

/// Output change of a down-projection when the hidden activation is patched
/// along `v = (v_disc + v_dorm)/√2`, with `v_disc` required to lie in
/// `ker W_out`.
///
/// Returns `W_out · (patched − base)`. The closed form is
/// [`illusory_closed_form`].
pub fn illusory_contribution<T: Real>(
    act_base: &Vector<T>,
    act_source: &Vector<T>,
    v_disc: &Vector<T>,
    v_dorm: &Vector<T>,
    w_out: &Matrix<T>,
) -> Result<Vector<T>> {
    let v = illusory_direction(v_disc, v_dorm, w_out)?;
    let patched = patch_1d(act_base, act_source, &v)?;
    Ok(w_out.matvec(&patched.sub(act_base)))
}

/// Validates the parts of an illusory direction and assembles it.
pub fn illusory_direction<T: Real>(v_disc: &Vector<T>, v_dorm: &Vector<T>, w_out: &Matrix<T>) -> Result<Vector<T>> {
    ensure_dim("v_disc", w_out.cols(), v_disc.len())?;
    ensure_dim("v_dorm", w_out.cols(), v_dorm.len())?;
    check_unit(v_disc)?;
    check_unit(v_dorm)?;
    let overlap = v_disc.dot(v_dorm).abs();
    if overlap > T::lit(1e-8) {
        return Err(Error::InvalidArgument(format!(
            "v_disc and v_dorm must be orthogonal, overlap {}",
            overlap.as_f64()
        )));
    }
    let leak = w_out.matvec(v_disc).norm();
    let scale = w_out.frobenius_norm().max(T::one());
    if leak > T::lit(1e-9) * scale {
        return Err(Error::NotInKernel(leak.as_f64()));
    }
    Ok(v_disc.add(v_dorm).scale(T::FRAC_1_SQRT_2()))
}

/// `½·((v_disc + v_dorm)ᵀ(source − base))·W_out·v_dorm`. When the dormant
/// projections of both activations agree this is the familiar
/// `½·(v_discᵀsource − v_discᵀbase)·W_out·v_dorm`.
pub fn illusory_closed_form<T: Real>(
    act_base: &Vector<T>,
    act_source: &Vector<T>,
    v_disc: &Vector<T>,
    v_dorm: &Vector<T>,
    w_out: &Matrix<T>,
) -> Vector<T> {
    let delta = act_source.sub(act_base);
    let gap = v_disc.dot(&delta) + v_dorm.dot(&delta);
    w_out.matvec(v_dorm).scale(T::lit(0.5) * gap)
}

/// Helper used by several experiments: the kernel projector of a
/// down-projection, built with the default rank tolerance.
pub fn kernel_of<T: Real>(w_out: &Matrix<T>) -> Result<KernelProjector<T>> {
    KernelProjector::new(w_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{nullspace_basis, Matrix, Vector};
    use crate::random::{gaussian_matrix, gaussian_vector, orthonormal_columns, rng, unit_vector};

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64(xs)
    }

    #[test]
    fn toy_patch_example() {
        let s = 0.5f64.sqrt();
        let out = patch_1d(&v(&[1.0, 0.0, 1.0]), &v(&[3.0, 0.0, 3.0]), &v(&[s, s, 0.0])).unwrap();
        for (a, b) in out.iter().zip([2.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_1d_projection_properties() {
        let mut g = rng(1);
        for _ in 0..20 {
            let base: Vector<f64> = gaussian_vector(&mut g, 9, 1.0);
            let src: Vector<f64> = gaussian_vector(&mut g, 9, 1.0);
            let dir: Vector<f64> = unit_vector(&mut g, 9);
            let p = patch_1d(&base, &src, &dir).unwrap();
            assert!((dir.dot(&p) - dir.dot(&src)).abs() < 1e-10);
            let rest_p = p.plus_scaled(-dir.dot(&p), &dir);
            let rest_b = base.plus_scaled(-dir.dot(&base), &dir);
            assert!(rest_p.sub(&rest_b).max_abs() < 1e-10);
            assert_eq!(patch_1d(&base, &base, &dir).unwrap(), base);
        }
    }

    #[test]
    fn patch_1d_rejects_non_unit() {
        let r = patch_1d(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &v(&[1.0, 1.0]));
        assert!(matches!(r, Err(Error::NotUnitNorm(_))));
    }

    #[test]
    fn patch_kd_limits_and_projector_oracle() {
        let mut g = rng(2);
        let base: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
        let src: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
        let full = patch_kd(&base, &src, &Matrix::identity(10)).unwrap();
        assert!(full.sub(&src).max_abs() < 1e-14);
        assert_eq!(patch_kd(&base, &src, &Matrix::zeros(10, 0)).unwrap(), base);

        let basis: Matrix<f64> = orthonormal_columns(&mut g, 10, 3);
        let proj = basis.matmul(&basis.transpose());
        let comp = Matrix::identity(10).sub(&proj);
        let oracle = comp.matvec(&base).add(&proj.matvec(&src));
        let got = patch_kd(&base, &src, &basis).unwrap();
        assert!(got.sub(&oracle).max_abs() < 1e-12);
        let twice = patch_kd(&got, &src, &basis).unwrap();
        assert!(twice.sub(&got).max_abs() < 1e-12);

        let col = basis.leading_columns(1);
        let a = patch_kd(&base, &src, &col).unwrap();
        let b = patch_1d(&base, &src, &col.column(0)).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-14);

        let bad = basis.scale(2.0);
        assert!(matches!(patch_kd(&base, &src, &bad), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn zero_subspace_literal_formula() {
        assert_eq!(zero_subspace_intervention(&v(&[3.0, 2.0]), &v(&[1.0, 0.0])).unwrap().as_slice(), &[0.0, 2.0]);
        assert_eq!(zero_subspace_intervention(&v(&[0.0, 2.0]), &v(&[1.0, 0.0])).unwrap().as_slice(), &[0.0, 2.0]);
        let mut g = rng(3);
        let x: Vector<f64> = gaussian_vector(&mut g, 6, 1.0);
        let dir = unit_vector::<f64>(&mut g, 6).scale(2.0);
        let got = zero_subspace_intervention(&x, &dir).unwrap();
        let literal = x.plus_scaled(-dir.dot(&x), &dir);
        let projector = x.plus_scaled(-dir.dot(&x) / 4.0, &dir);
        assert!(got.sub(&literal).max_abs() < 1e-14);
        assert!(got.sub(&projector).max_abs() > 1e-3);
    }

    #[test]
    fn rank1_edit_contribution() {
        let w = Matrix::<f64>::zeros(2, 3);
        let e = apply_rank1_edit(&w, &v(&[1.0, 0.0]), &v(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(e[(0, 1)], 1.0);
        assert_eq!(e.frobenius_norm(), 1.0);
        let mut g = rng(4);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 7, 1.0);
        assert_eq!(apply_rank1_edit(&w, &Vector::zeros(4), &gaussian_vector(&mut g, 7, 1.0)).unwrap(), w);
        let a: Vector<f64> = gaussian_vector(&mut g, 4, 1.0);
        let b: Vector<f64> = gaussian_vector(&mut g, 7, 1.0);
        let e = apply_rank1_edit(&w, &a, &b).unwrap();
        for _ in 0..100 {
            let x: Vector<f64> = gaussian_vector(&mut g, 7, 1.0);
            let diff = e.matvec(&x).sub(&w.matvec(&x));
            assert!(diff.sub(&a.scale(b.dot(&x))).max_abs() < 1e-10);
        }
    }

    #[test]
    fn zero_subspace_equals_rank1_edit() {
        let mut g = rng(5);
        for _ in 0..100 {
            let w: Matrix<f64> = gaussian_matrix(&mut g, 5, 12, 1.0);
            let x: Vector<f64> = gaussian_vector(&mut g, 12, 1.0);
            let dir: Vector<f64> = gaussian_vector(&mut g, 12, 0.7);
            let lhs = w.matvec(&zero_subspace_intervention(&x, &dir).unwrap());
            let edited = apply_rank1_edit(&w, &w.matvec(&dir), &dir.scale(-1.0)).unwrap();
            let rhs = edited.matvec(&x);
            assert!(lhs.sub(&rhs).max_abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_patch_is_disconnected() {
        let mut g = rng(6);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 10, 1.0);
        let n = nullspace_basis(&w, None).unwrap();
        for j in 0..n.cols() {
            let dir = n.column(j);
            let x: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
            let xp: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
            let p = patch_1d(&x, &xp, &dir).unwrap();
            assert!(w.matvec(&p).sub(&w.matvec(&x)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn toy_illusory_contribution() {
        let w = Matrix::from_f64_rows(&[&[0.0, 2.0, 1.0]]).unwrap();
        let c = illusory_contribution(&v(&[1.0, 0.0, 1.0]), &v(&[3.0, 0.0, 3.0]), &v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &w)
            .unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        let zero = illusory_contribution(&v(&[1.0, 0.0, 1.0]), &v(&[1.0, 0.0, 1.0]), &v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &w)
            .unwrap();
        assert_eq!(zero[0], 0.0);
        let leak = illusory_contribution(&v(&[1.0, 0.0, 1.0]), &v(&[3.0, 0.0, 3.0]), &v(&[0.0, 0.0, 1.0]), &v(&[0.0, 1.0, 0.0]), &w);
        assert!(matches!(leak, Err(Error::NotInKernel(_))));
    }

    #[test]
    fn illusory_closed_form_matches_direct() {
        let mut g = rng(7);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 12, 1.0);
        let kp = KernelProjector::new(&w).unwrap();
        let v_disc = kp.project_null(&gaussian_vector(&mut g, 12, 1.0)).normalized().unwrap();
        let v_dorm = kp.project_row(&gaussian_vector(&mut g, 12, 1.0)).normalized().unwrap();
        let base: Vector<f64> = gaussian_vector(&mut g, 12, 1.0);
        let noise: Vector<f64> = gaussian_vector(&mut g, 12, 1.0);
        let src = base.plus_scaled(1.7, &v_disc).plus_scaled(0.3, &noise);
        let direct = illusory_contribution(&base, &src, &v_disc, &v_dorm, &w).unwrap();
        let closed = illusory_closed_form(&base, &src, &v_disc, &v_dorm, &w);
        assert!(direct.sub(&closed).max_abs() < 1e-10);
    }
}
