// SPDX-License-Identifier: MIT OR Apache-2.0

//! A residual stream with one MLP in the middle. A binary feature is written
//! along `v_feat` and read back by the unembedding; the MLP sees the feature
//! but, in the canonical construction, does not write anything the
//! unembedding depends on.

use serde::{Deserialize, Serialize};

use super::activation::gelu_vec;
use super::mlp::{make_random_mlp, MlpLayer};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::patching::{InterventionKind, InterventionSpec, Site};
use crate::random::{gaussian_vector, rng, substream, unit_vector};
use crate::scalar::Real;

/// Construction parameters of a [`SyntheticPathwayModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub d_resid: usize,
    pub d_mlp: usize,
    pub c: f64,
    pub noise_scale: f64,
    pub target_output_norm: f64,
    /// Standard deviation of the residual base `mu` per coordinate.
    pub mu_scale: f64,
    /// Remove the noise-free class difference of the hidden activation from
    /// the row space of `W_out`, and cancel the MLP's mean write along
    /// `v_feat`, so the MLP carries no feature signal to the output.
    pub feature_silent_mlp: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d_resid: 64,
            d_mlp: 256,
            c: 2.0,
            noise_scale: 0.1,
            target_output_norm: 4.0,
            mu_scale: 1.0,
            feature_silent_mlp: true,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_resid == 0 || self.d_mlp <= self.d_resid {
            return Err(Error::Config(format!(
                "need 0 < d_resid < d_mlp, got {} and {}",
                self.d_resid, self.d_mlp
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("feature amplitude c must be positive, got {}", self.c)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config(format!("noise_scale must be >= 0, got {}", self.noise_scale)));
        }
        if !(self.mu_scale >= 0.0 && self.mu_scale.is_finite()) {
            return Err(Error::Config(format!("mu_scale must be >= 0, got {}", self.mu_scale)));
        }
        if !(self.target_output_norm > 0.0 && self.target_output_norm.is_finite()) {
            return Err(Error::Config(format!(
                "target_output_norm must be positive, got {}",
                self.target_output_norm
            )));
        }
        Ok(())
    }

    pub fn build<T: Real>(&self) -> Result<SyntheticPathwayModel<T>> {
        build_synthetic(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct SyntheticPathwayModel<T> {
    pub d_resid: usize,
    pub mlp: MlpLayer<T>,
    pub mu: Vector<T>,
    pub v_feat: Vector<T>,
    pub c: T,
    pub noise_scale: T,
    pub unembed: Matrix<T>,
    /// Seed the weights were built from, if any.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Every intermediate activation of one forward pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ActivationCache<T> {
    pub resid_pre: Vector<T>,
    pub mlp_pre_act: Vector<T>,
    pub mlp_post_act: Vector<T>,
    pub mlp_out: Vector<T>,
    pub resid_post: Vector<T>,
    pub logits: Vector<T>,
}

impl<T: Real> ActivationCache<T> {
    pub fn get(&self, site: Site) -> &Vector<T> {
        match site {
            Site::ResidPre => &self.resid_pre,
            Site::MlpPostAct => &self.mlp_post_act,
            Site::MlpOut => &self.mlp_out,
            Site::ResidPost => &self.resid_post,
        }
    }

    pub fn logitdiff(&self) -> T {
        self.logits[0] - self.logits[1]
    }
}

impl<T: Real> SyntheticPathwayModel<T> {
    pub fn new(
        mlp: MlpLayer<T>,
        mu: Vector<T>,
        v_feat: Vector<T>,
        c: T,
        noise_scale: T,
        unembed: Matrix<T>,
    ) -> Result<Self> {
        let model = Self {
            d_resid: mu.len(),
            mlp,
            mu,
            v_feat,
            c,
            noise_scale,
            unembed,
            seed: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        ensure_dim("mlp d_resid", self.d_resid, self.mlp.d_resid())?;
        ensure_dim("mu", self.d_resid, self.mu.len())?;
        ensure_dim("v_feat", self.d_resid, self.v_feat.len())?;
        ensure_dim("unembed rows", 2, self.unembed.rows())?;
        ensure_dim("unembed cols", self.d_resid, self.unembed.cols())?;
        let n = self.v_feat.norm();
        if (n - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(Error::NotUnitNorm(n.as_f64()));
        }
        if !(self.noise_scale >= T::zero()) {
            return Err(Error::InvalidArgument("noise_scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn d_mlp(&self) -> usize {
        self.mlp.d_mlp()
    }

    pub fn site_dim(&self, site: Site) -> usize {
        match site {
            Site::MlpPostAct => self.d_mlp(),
            _ => self.d_resid,
        }
    }

    /// Difference between the two logit rows, `u₀ − u₁`.
    pub fn readout_direction(&self) -> Vector<T> {
        self.unembed.row_vector(0).sub(&self.unembed.row_vector(1))
    }

    /// Noise-free residual input for a class.
    pub fn clean_input(&self, label: i8) -> Vector<T> {
        self.mu.plus_scaled(T::from_i8(label).unwrap() * self.c, &self.v_feat)
    }

    pub fn forward(&self, resid_pre: &Vector<T>) -> Result<ActivationCache<T>> {
        forward_with_cache(self, resid_pre, None)
    }

    /// Logits computed from a given activation at `site`, everything
    /// upstream taken from `base` (needed for the skip connection).
    pub fn logits_from_site(&self, site: Site, act: &Vector<T>, base: &ActivationCache<T>) -> Result<Vector<T>> {
        ensure_dim("site activation", self.site_dim(site), act.len())?;
        let resid_post = match site {
            Site::ResidPre => act.add(&self.mlp.forward(act)),
            Site::MlpPostAct => base.resid_pre.add(&self.mlp.project_out(act)),
            Site::MlpOut => base.resid_pre.add(act),
            Site::ResidPost => act.clone(),
        };
        Ok(self.unembed.matvec(&resid_post))
    }
}

/// Runs the model, optionally applying one intervention at its site before
/// the rest of the forward pass.
pub fn forward_with_cache<T: Real>(
    model: &SyntheticPathwayModel<T>,
    resid_pre: &Vector<T>,
    intervention: Option<&InterventionSpec<T>>,
) -> Result<ActivationCache<T>> {
    ensure_dim("resid_pre", model.d_resid, resid_pre.len())?;
    if let Some(spec) = intervention {
        spec.validate()?;
    }
    let at = |site: Site, act: Vector<T>| -> Result<Vector<T>> {
        match intervention {
            Some(spec) if spec.site == site && !spec.is_weight_edit() => {
                let out = spec.apply_to_activation(&act)?;
                ensure_dim("intervened activation", act.len(), out.len())?;
                Ok(out)
            }
            _ => Ok(act),
        }
    };

    let resid_pre = at(Site::ResidPre, resid_pre.clone())?;
    let mlp_pre_act = model.mlp.pre_activation(&resid_pre);
    let mlp_post_act = at(Site::MlpPostAct, gelu_vec(&mlp_pre_act))?;
    let mut mlp_out = model.mlp.project_out(&mlp_post_act);
    if let Some(InterventionSpec { kind: InterventionKind::Rank1Edit { a, b }, .. }) = intervention {
        ensure_dim("rank-1 edit a", model.d_resid, a.len())?;
        ensure_dim("rank-1 edit b", model.d_mlp(), b.len())?;
        mlp_out = mlp_out.plus_scaled(b.dot(&mlp_post_act), a);
    }
    let mlp_out = at(Site::MlpOut, mlp_out)?;
    let resid_post = at(Site::ResidPost, resid_pre.add(&mlp_out))?;
    let logits = model.unembed.matvec(&resid_post);
    Ok(ActivationCache { resid_pre, mlp_pre_act, mlp_post_act, mlp_out, resid_post, logits })
}

/// `mu + label·c·v_feat + noise`, noise drawn from `seed`.
pub fn sample_example<T: Real>(model: &SyntheticPathwayModel<T>, label: i8, seed: u64) -> Result<Vector<T>> {
    if label != 1 && label != -1 {
        return Err(Error::InvalidArgument(format!("label must be +1 or -1, got {label}")));
    }
    let mut g = rng(seed);
    let noise: Vector<T> = gaussian_vector(&mut g, model.d_resid, model.noise_scale.as_f64());
    Ok(model.clean_input(label).add(&noise))
}

/// Builds the synthetic model from its configuration.
pub fn build_synthetic<T: Real>(cfg: &SyntheticConfig) -> Result<SyntheticPathwayModel<T>> {
    cfg.validate()?;
    let d = cfg.d_resid;
    let mut mlp: MlpLayer<T> = make_random_mlp(cfg.seed, d, cfg.d_mlp, cfg.target_output_norm)?;

    let v_feat: Vector<T> = unit_vector(&mut substream(cfg.seed, 1), d);
    let mu_raw: Vector<T> = gaussian_vector(&mut substream(cfg.seed, 2), d, cfg.mu_scale);
    let mu = mu_raw.plus_scaled(-v_feat.dot(&mu_raw), &v_feat);
    let c = T::lit(cfg.c);

    if cfg.feature_silent_mlp {
        let up = mlp.post_activation(&mu.plus_scaled(c, &v_feat));
        let down = mlp.post_activation(&mu.plus_scaled(-c, &v_feat));
        let delta = up.sub(&down);
        if delta.norm() > T::zero() {
            let dir = delta.normalized()?;
            let w_dir = mlp.w_out.matvec(&dir);
            mlp.w_out = mlp.w_out.sub(&Matrix::outer(&w_dir, &dir));
        }
        let mid = up.add(&down).scale(T::lit(0.5));
        let mean_write = v_feat.dot(&mlp.project_out(&mid));
        mlp.b_out = mlp.b_out.plus_scaled(-mean_write, &v_feat);
    }

    let neg = v_feat.scale(-T::one());
    let unembed = Matrix::from_row_vectors(&[v_feat.clone(), neg]);
    let mut model = SyntheticPathwayModel::new(mlp, mu, v_feat, c, T::lit(cfg.noise_scale), unembed)?;
    model.seed = Some(cfg.seed);
    Ok(model)
}
