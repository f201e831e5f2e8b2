// SPDX-License-Identifier: MIT OR Apache-2.0

use super::pairs::PatchPair;
use crate::error::{ensure_dim, Result};
use crate::linalg::{Matrix, Vector};
use crate::model_zoo::{gelu_derivative, ActivationCache, SyntheticPathwayModel};
use crate::patching::{check_orthonormal, Site};
use crate::scalar::Real;

/// Per-pair quantities that do not depend on the subspace.
#[derive(Clone, Debug)]
pub struct PreparedPair<T> {
    pub base: ActivationCache<T>,
    pub source_act: Vector<T>,
    pub target: T,
}

impl<T: Real> PreparedPair<T> {
    pub fn new(model: &SyntheticPathwayModel<T>, pair: &PatchPair<T>, site: Site) -> Result<Self> {
        let base = model.forward(&pair.base_input)?;
        let source_act = model.forward(&pair.source_input)?.get(site).clone();
        Ok(Self { base, source_act, target: T::from_i8(pair.target_logitdiff_sign).unwrap() })
    }

    fn delta(&self, site: Site) -> Vector<T> {
        self.source_act.sub(self.base.get(site))
    }

    fn patched(&self, basis: &Matrix<T>, site: Site) -> Vector<T> {
        let delta = self.delta(site);
        self.base.get(site).add(&basis.matvec(&basis.tr_matvec(&delta)))
    }

    /// `−target · logitdiff` after patching with `basis` (no orthonormality
    /// check; the formula extends smoothly to arbitrary matrices).
    pub fn loss(&self, model: &SyntheticPathwayModel<T>, basis: &Matrix<T>, site: Site) -> Result<T> {
        ensure_dim("DAS basis rows", model.site_dim(site), basis.rows())?;
        let logits = model.logits_from_site(site, &self.patched(basis, site), &self.base)?;
        Ok(-self.target * (logits[0] - logits[1]))
    }

    pub fn loss_and_grad(&self, model: &SyntheticPathwayModel<T>, basis: &Matrix<T>, site: Site) -> Result<(T, Matrix<T>)> {
        ensure_dim("DAS basis rows", model.site_dim(site), basis.rows())?;
        let delta = self.delta(site);
        let patched = self.base.get(site).add(&basis.matvec(&basis.tr_matvec(&delta)));
        let logits = model.logits_from_site(site, &patched, &self.base)?;
        let loss = -self.target * (logits[0] - logits[1]);
        let g = downstream_gradient(model, site, &patched, self.target);
        // d/dV of gᵀ V Vᵀ δ = g (Vᵀδ)ᵀ + δ (Vᵀg)ᵀ
        let vd = basis.tr_matvec(&delta);
        let vg = basis.tr_matvec(&g);
        let grad = Matrix::outer(&g, &vd).add(&Matrix::outer(&delta, &vg));
        Ok((loss, grad))
    }
}

/// Gradient of `−target · logitdiff` with respect to the activation at
/// `site`, evaluated at `act`.
pub fn downstream_gradient<T: Real>(model: &SyntheticPathwayModel<T>, site: Site, act: &Vector<T>, target: T) -> Vector<T> {
    let r = model.readout_direction().scale(-target);
    match site {
        Site::ResidPost | Site::MlpOut => r,
        Site::MlpPostAct => model.mlp.w_out.tr_matvec(&r),
        Site::ResidPre => {
            let pre = model.mlp.pre_activation(act);
            let hidden = model.mlp.w_out.tr_matvec(&r);
            let gated = Vector::from_fn(hidden.len(), |i| hidden[i] * gelu_derivative(pre[i]));
            r.add(&model.mlp.w_in.tr_matvec(&gated))
        }
    }
}

/// `−target_sign × patched_logitdiff` for patching the pair along the
/// orthonormal columns of `basis` at `site`.
pub fn das_loss<T: Real>(model: &SyntheticPathwayModel<T>, pair: &PatchPair<T>, basis: &Matrix<T>, site: Site) -> Result<T> {
    check_orthonormal(basis)?;
    PreparedPair::new(model, pair, site)?.loss(model, basis, site)
}

/// Gradient of [`das_loss`] with respect to the entries of `basis`.
pub fn das_grad<T: Real>(model: &SyntheticPathwayModel<T>, pair: &PatchPair<T>, basis: &Matrix<T>, site: Site) -> Result<Matrix<T>> {
    Ok(PreparedPair::new(model, pair, site)?.loss_and_grad(model, basis, site)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::das::make_pairs;
    use crate::linalg::nullspace_basis;
    use crate::model_zoo::SyntheticConfig;
    use crate::random::{orthonormal_columns, rng};

    fn model(noise: f64) -> SyntheticPathwayModel<f64> {
        SyntheticConfig { d_resid: 6, d_mlp: 20, noise_scale: noise, seed: 3, ..Default::default() }.build().unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(0.3);
        let pairs = make_pairs(&m, 4, 1).unwrap();
        let mut g = rng(2);
        for site in Site::ALL {
            for pair in &pairs {
                let basis: Matrix<f64> = orthonormal_columns(&mut g, m.site_dim(site), 2);
                let prep = PreparedPair::new(&m, pair, site).unwrap();
                let (_, grad) = prep.loss_and_grad(&m, &basis, site).unwrap();
                let h = 1e-5;
                for i in 0..basis.rows() {
                    for j in 0..basis.cols() {
                        let mut p = basis.clone();
                        p[(i, j)] += h;
                        let mut q = basis.clone();
                        q[(i, j)] -= h;
                        let fd = (prep.loss(&m, &p, site).unwrap() - prep.loss(&m, &q, site).unwrap()) / (2.0 * h);
                        let a = grad[(i, j)];
                        if a.abs() > 1e-6 {
                            assert!(((a - fd) / a).abs() < 1e-6, "{site} ({i},{j}) analytic {a} fd {fd}");
                        } else {
                            assert!(fd.abs() < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_subspace_has_no_effect() {
        let m = model(0.1);
        let n = nullspace_basis(&m.mlp.w_out, None).unwrap();
        let basis = n.leading_columns(1);
        for pair in make_pairs(&m, 6, 9).unwrap() {
            let clean = -(pair.target_logitdiff_sign as f64) * m.forward(&pair.base_input).unwrap().logitdiff();
            let l = das_loss(&m, &pair, &basis, Site::MlpPostAct).unwrap();
            assert!((l - clean).abs() < 1e-10);
        }
    }

    #[test]
    fn self_pair_loss_is_clean_and_flat() {
        let m = model(0.1);
        let mut pair = make_pairs(&m, 1, 2).unwrap().remove(0);
        pair.source_input = pair.base_input.clone();
        let basis: Matrix<f64> = orthonormal_columns(&mut rng(1), 20, 1);
        let clean = -(pair.target_logitdiff_sign as f64) * m.forward(&pair.base_input).unwrap().logitdiff();
        assert!((das_loss(&m, &pair, &basis, Site::MlpPostAct).unwrap() - clean).abs() < 1e-12);
        assert!(das_grad(&m, &pair, &basis, Site::MlpPostAct).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn feature_direction_flips_noise_free_pair() {
        let m = model(0.0);
        let pairs = crate::das::make_pairs_with(&m, 2, 5, crate::das::PairMix::OppositeOnly, &Default::default()).unwrap();
        let basis = Matrix::from_columns(6, std::slice::from_ref(&m.v_feat));
        for pair in pairs {
            let clean = m.forward(&pair.base_input).unwrap().logitdiff();
            let l = das_loss(&m, &pair, &basis, Site::ResidPre).unwrap();
            let patched = -l * pair.target_logitdiff_sign as f64;
            assert!((patched + clean).abs() < 1e-9, "clean {clean} patched {patched}");
        }
    }
}
