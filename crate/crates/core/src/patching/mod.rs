// SPDX-License-Identifier: MIT OR Apache-2.0

//! Intervention operators: one- and k-dimensional subspace patches, the
//! zero-target subspace intervention, full replacement and rank-1 edits of
//! the MLP down-projection.

mod ops;
mod site;
mod spec;

pub use ops::{
    apply_rank1_edit, illusory_closed_form, illusory_contribution, illusory_direction, kernel_of, patch_1d, patch_kd,
    zero_subspace_intervention, UNIT_TOL,
};
#[allow(unused_imports)]
pub(crate) use ops::{check_orthonormal, check_unit};
pub use site::Site;
pub use spec::{InterventionKind, InterventionSpec, PatchOutcome};
