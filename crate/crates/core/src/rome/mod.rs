// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rank-1 edits of the MLP down-projection: the closed-form key/value edit,
//! the edit induced by a one-dimensional activation patch, and the
//! Lagrangian approximation of an edit by a zero-target subspace
//! intervention.

mod edit;
mod subspace;

pub use edit::{edit_vs_patch_model_comparison, patch_to_edit, rome_edit, EditPatchComparison, Rank1Edit, RomeRequest};
pub use subspace::{edit_to_subspace, AlphaPoint, SubspaceApproxResult, DEFAULT_ALPHA_SQ_GRID};
