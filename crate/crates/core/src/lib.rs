// SPDX-License-Identifier: MIT OR Apache-2.0

//! A numerical laboratory for subspace activation patching.
//!
//! The crate builds small analyzable models, patches their activations along
//! arbitrary subspaces, searches for patching directions by gradient descent,
//! and measures when a successful patch is explained by a causally
//! disconnected component that switches on an otherwise dormant pathway.
//! It also relates one-dimensional patches to rank-1 weight edits of an MLP
//! down-projection.
//!
//! Every algorithm is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the experiment
//! runners and the acceptance tolerances assume.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod das;
pub mod error;
pub mod illusion;
pub mod linalg;
pub mod model_zoo;
pub mod patching;
pub mod random;
pub mod report;
pub mod rome;
pub mod scalar;
pub mod scenarios;
pub mod separability;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Vector = linalg::Vector<f64>;
pub type SvdResult = linalg::SvdResult<f64>;
