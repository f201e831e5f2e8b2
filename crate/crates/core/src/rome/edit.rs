// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::das::PatchPair;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Cholesky, Matrix, Vector};
use crate::model_zoo::{forward_with_cache, SyntheticPathwayModel};
use crate::patching::{apply_rank1_edit, check_unit, InterventionSpec, Site};
use crate::scalar::Real;

/// `W ↦ W + a bᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Rank1Edit<T> {
    pub a: Vector<T>,
    pub b: Vector<T>,
}

impl<T: Real> Rank1Edit<T> {
    pub fn apply(&self, w: &Matrix<T>) -> Result<Matrix<T>> {
        apply_rank1_edit(w, &self.a, &self.b)
    }
}

/// Key `k`, desired value `v_target`, and key covariance `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RomeRequest<T> {
    pub k: Vector<T>,
    pub v_target: Vector<T>,
    pub sigma: Matrix<T>,
}

fn factor_covariance<T: Real>(sigma: &Matrix<T>) -> Result<Cholesky<T>> {
    Cholesky::factor(sigma).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => Error::Degenerate(format!(
            "covariance is not positive definite (pivot {pivot} = {value:e}); add a ridge via uncentered_covariance"
        )),
        other => other,
    })
}

/// `a = v_target − W k`, `b = Σ⁻¹k / (kᵀΣ⁻¹k)`: the rank-1 edit mapping `k`
/// to `v_target` with the smallest contribution variance.
pub fn rome_edit<T: Real>(w_out: &Matrix<T>, req: &RomeRequest<T>) -> Result<Rank1Edit<T>> {
    ensure_dim("ROME key", w_out.cols(), req.k.len())?;
    ensure_dim("ROME value", w_out.rows(), req.v_target.len())?;
    ensure_dim("ROME covariance", w_out.cols(), req.sigma.rows())?;
    if req.k.norm() == T::zero() {
        return Err(Error::ZeroVector("ROME key"));
    }
    let chol = factor_covariance(&req.sigma)?;
    let sk = chol.solve(&req.k)?;
    let denom = req.k.dot(&sk);
    if !(denom > T::zero()) {
        return Err(Error::Degenerate("kᵀΣ⁻¹k is not positive".into()));
    }
    Ok(Rank1Edit {
        a: req.v_target.sub(&w_out.matvec(&req.k)),
        b: sk.scale(T::one() / denom),
    })
}

/// The rank-1 edit whose effect on the activation `u_A` equals patching
/// `u_A` along `v` from `u_B`:
/// `a = ((u_B − u_A)ᵀv)·W v`, `b = Σ⁻¹u_A / (u_AᵀΣ⁻¹u_A)`.
pub fn patch_to_edit<T: Real>(u_a: &Vector<T>, u_b: &Vector<T>, v: &Vector<T>, w_out: &Matrix<T>, sigma: &Matrix<T>) -> Result<Rank1Edit<T>> {
    ensure_dim("patch_to_edit u_B", u_a.len(), u_b.len())?;
    ensure_dim("patch_to_edit v", u_a.len(), v.len())?;
    ensure_dim("patch_to_edit W_out", w_out.cols(), u_a.len())?;
    check_unit(v)?;
    if u_a.norm() == T::zero() {
        return Err(Error::ZeroVector("patch_to_edit u_A"));
    }
    let gap = u_b.sub(u_a).dot(v);
    let a = w_out.matvec(v).scale(gap);
    let chol = factor_covariance(sigma)?;
    let su = chol.solve(u_a)?;
    let denom = u_a.dot(&su);
    if !(denom > T::zero()) {
        return Err(Error::Degenerate("u_AᵀΣ⁻¹u_A is not positive".into()));
    }
    Ok(Rank1Edit { a, b: su.scale(T::one() / denom) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EditPatchComparison<T> {
    pub clean_logits: Vector<T>,
    pub logits_under_patch: Vector<T>,
    pub logits_under_edit: Vector<T>,
    pub edit: Rank1Edit<T>,
}

/// Runs the base input of `pair` once with the hidden activation patched
/// along `v` from the source, and once with the equivalent rank-1 edit of
/// `W_out`.
pub fn edit_vs_patch_model_comparison<T: Real>(
    model: &SyntheticPathwayModel<T>,
    pair: &PatchPair<T>,
    v: &Vector<T>,
    sigma: &Matrix<T>,
) -> Result<EditPatchComparison<T>> {
    let base = model.forward(&pair.base_input)?;
    let source = model.forward(&pair.source_input)?;
    let edit = patch_to_edit(&base.mlp_post_act, &source.mlp_post_act, v, &model.mlp.w_out, sigma)?;
    let patch = InterventionSpec::patch_direction(Site::MlpPostAct, v, source.mlp_post_act.clone())?;
    let patched = forward_with_cache(model, &pair.base_input, Some(&patch))?;
    let edited = forward_with_cache(model, &pair.base_input, Some(&InterventionSpec::rank1_edit(edit.a.clone(), edit.b.clone())))?;
    Ok(EditPatchComparison {
        clean_logits: base.logits,
        logits_under_patch: patched.logits,
        logits_under_edit: edited.logits,
        edit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::patch_1d;
    use crate::random::{gaussian_matrix, gaussian_vector, rng, unit_vector};

    fn spd(g: &mut crate::random::LabRng, n: usize) -> Matrix<f64> {
        let l: Matrix<f64> = gaussian_matrix(g, n, n, 1.0);
        l.tr_matmul(&l).add(&Matrix::identity(n).scale(0.1))
    }

    #[test]
    fn identity_covariance_reduces() {
        let mut g = rng(1);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 3, 5, 1.0);
        let k: Vector<f64> = gaussian_vector(&mut g, 5, 1.0);
        let req = RomeRequest { k: k.clone(), v_target: gaussian_vector(&mut g, 3, 1.0), sigma: Matrix::identity(5) };
        let e = rome_edit(&w, &req).unwrap();
        assert!(e.b.sub(&k.scale(1.0 / k.norm_sq())).max_abs() < 1e-14);
        let noop = rome_edit(&w, &RomeRequest { v_target: w.matvec(&k), ..req }).unwrap();
        assert_eq!(noop.a.max_abs(), 0.0);
    }

    #[test]
    fn edit_maps_key_to_value() {
        let mut g = rng(2);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 9, 1.0);
        let req = RomeRequest { k: gaussian_vector(&mut g, 9, 1.0), v_target: gaussian_vector(&mut g, 4, 1.0), sigma: spd(&mut g, 9) };
        let e = rome_edit(&w, &req).unwrap();
        let w2 = e.apply(&w).unwrap();
        assert!(w2.matvec(&req.k).sub(&req.v_target).norm() < 1e-8 * req.v_target.norm());
        assert!((e.b.dot(&req.k) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn singular_covariance_is_reported() {
        let w = Matrix::<f64>::identity(2);
        let req = RomeRequest { k: Vector::from_f64(&[1.0, 0.0]), v_target: Vector::from_f64(&[0.0, 1.0]), sigma: Matrix::diag(&[1.0, 0.0]) };
        assert!(matches!(rome_edit(&w, &req), Err(Error::Degenerate(_))));
    }

    #[test]
    fn patch_to_edit_matches_patch() {
        let mut g = rng(3);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 10, 1.0);
        let sigma = spd(&mut g, 10);
        let ua: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
        let ub: Vector<f64> = gaussian_vector(&mut g, 10, 1.0);
        let v: Vector<f64> = unit_vector(&mut g, 10);
        let e = patch_to_edit(&ua, &ub, &v, &w, &sigma).unwrap();
        assert!((e.b.dot(&ua) - 1.0).abs() < 1e-10);
        let lhs = e.apply(&w).unwrap().matvec(&ua);
        let rhs = w.matvec(&patch_1d(&ua, &ub, &v).unwrap());
        assert!(lhs.sub(&rhs).norm() < 1e-9 * rhs.norm());
        assert_eq!(patch_to_edit(&ua, &ua, &v, &w, &sigma).unwrap().a.max_abs(), 0.0);
        let id = patch_to_edit(&ua, &ub, &v, &w, &Matrix::identity(10)).unwrap();
        assert!(id.b.sub(&ua.scale(1.0 / ua.norm_sq())).max_abs() < 1e-14);
        assert!(patch_to_edit(&Vector::zeros(10), &ub, &v, &w, &sigma).is_err());
    }
}
