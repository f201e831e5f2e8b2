// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::ops::{check_orthonormal, check_unit, patch_kd, zero_subspace_intervention};
use super::site::Site;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// What an intervention does at its site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum InterventionKind<T> {
    /// Replace the whole activation.
    FullReplace { value: Vector<T> },
    /// Interchange along the span of orthonormal `basis` columns.
    SubspacePatch { basis: Matrix<T>, source_activation: Vector<T> },
    /// `x ↦ x − (vᵀx)v`; with `unit_constrained` the direction must be unit.
    ZeroSubspace { v: Vector<T>, unit_constrained: bool },
    /// `W_out ↦ W_out + a bᵀ`.
    Rank1Edit { a: Vector<T>, b: Vector<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InterventionSpec<T> {
    pub site: Site,
    #[serde(flatten)]
    pub kind: InterventionKind<T>,
}

impl<T: Real> InterventionSpec<T> {
    pub fn full_replace(site: Site, value: Vector<T>) -> Self {
        Self { site, kind: InterventionKind::FullReplace { value } }
    }

    pub fn subspace_patch(site: Site, basis: Matrix<T>, source_activation: Vector<T>) -> Result<Self> {
        let spec = Self { site, kind: InterventionKind::SubspacePatch { basis, source_activation } };
        spec.validate()?;
        Ok(spec)
    }

    /// One-dimensional interchange along unit `v`.
    pub fn patch_direction(site: Site, v: &Vector<T>, source_activation: Vector<T>) -> Result<Self> {
        Self::subspace_patch(site, Matrix::from_columns(v.len(), std::slice::from_ref(v)), source_activation)
    }

    pub fn zero_subspace(site: Site, v: Vector<T>, unit_constrained: bool) -> Result<Self> {
        let spec = Self { site, kind: InterventionKind::ZeroSubspace { v, unit_constrained } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rank1_edit(a: Vector<T>, b: Vector<T>) -> Self {
        Self { site: Site::MlpOut, kind: InterventionKind::Rank1Edit { a, b } }
    }

    /// Checks the invariants that do not depend on a model.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            InterventionKind::FullReplace { .. } => Ok(()),
            InterventionKind::SubspacePatch { basis, source_activation } => {
                ensure_dim("subspace basis rows", source_activation.len(), basis.rows())?;
                check_orthonormal(basis)
            }
            InterventionKind::ZeroSubspace { v, unit_constrained } => {
                if *unit_constrained {
                    check_unit(v)?;
                }
                Ok(())
            }
            InterventionKind::Rank1Edit { .. } => {
                if self.site != Site::MlpOut {
                    return Err(Error::InvalidSite { kind: "rank1_edit", site: self.site.to_string() });
                }
                Ok(())
            }
        }
    }

    pub fn is_weight_edit(&self) -> bool {
        matches!(self.kind, InterventionKind::Rank1Edit { .. })
    }

    /// Transforms an activation at the bound site. Weight edits are not
    /// activation transforms and are rejected here.
    pub fn apply_to_activation(&self, act: &Vector<T>) -> Result<Vector<T>> {
        match &self.kind {
            InterventionKind::FullReplace { value } => {
                ensure_dim("full replacement", act.len(), value.len())?;
                Ok(value.clone())
            }
            InterventionKind::SubspacePatch { basis, source_activation } => patch_kd(act, source_activation, basis),
            InterventionKind::ZeroSubspace { v, unit_constrained } => {
                if *unit_constrained {
                    check_unit(v)?;
                }
                zero_subspace_intervention(act, v)
            }
            InterventionKind::Rank1Edit { .. } => Err(Error::InvalidSite { kind: "rank1_edit", site: self.site.to_string() }),
        }
    }
}

/// Clean and patched logits of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PatchOutcome<T> {
    pub clean_logits: Vector<T>,
    pub patched_logits: Vector<T>,
    pub clean_logitdiff: T,
    pub patched_logitdiff: T,
}

impl<T: Real> PatchOutcome<T> {
    pub fn new(clean_logits: Vector<T>, patched_logits: Vector<T>) -> Result<Self> {
        ensure_dim("clean logits", 2, clean_logits.len())?;
        ensure_dim("patched logits", 2, patched_logits.len())?;
        let clean_logitdiff = clean_logits[0] - clean_logits[1];
        let patched_logitdiff = patched_logits[0] - patched_logits[1];
        Ok(Self { clean_logits, patched_logits, clean_logitdiff, patched_logitdiff })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_kind_tag() {
        let spec = InterventionSpec::<f64>::patch_direction(
            Site::MlpPostAct,
            &Vector::from_f64(&[0.6, 0.8]),
            Vector::from_f64(&[1.0, 2.0]),
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"subspace_patch\""));
        assert!(json.contains("\"site\":\"mlp_post_act\""));
        let back: InterventionSpec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);

        let edit = InterventionSpec::<f64>::rank1_edit(Vector::from_f64(&[1.0]), Vector::from_f64(&[2.0]));
        let back: InterventionSpec<f64> = serde_json::from_str(&serde_json::to_string(&edit).unwrap()).unwrap();
        assert_eq!(back, edit);
    }

    #[test]
    fn rank1_edit_only_at_mlp_out() {
        let mut edit = InterventionSpec::<f64>::rank1_edit(Vector::from_f64(&[1.0]), Vector::from_f64(&[2.0]));
        assert!(edit.validate().is_ok());
        edit.site = Site::ResidPre;
        assert!(matches!(edit.validate(), Err(Error::InvalidSite { .. })));
    }

    #[test]
    fn unit_constrained_zero_subspace() {
        assert!(InterventionSpec::<f64>::zero_subspace(Site::MlpOut, Vector::from_f64(&[2.0, 0.0]), true).is_err());
        let s = InterventionSpec::<f64>::zero_subspace(Site::MlpOut, Vector::from_f64(&[2.0, 0.0]), false).unwrap();
        let out = s.apply_to_activation(&Vector::from_f64(&[1.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[-3.0, 1.0]);
    }

    #[test]
    fn outcome_logitdiffs() {
        let o = PatchOutcome::new(Vector::<f64>::from_f64(&[3.0, 1.0]), Vector::from_f64(&[0.5, 1.5])).unwrap();
        assert_eq!(o.clean_logitdiff, 2.0);
        assert_eq!(o.patched_logitdiff, -1.0);
    }
}
