// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear algebra: factorizations, projectors, pseudoinverse,
//! covariance and small SPD solves.

mod cholesky;
mod covariance;
mod matrix;
mod qr;
mod subspace;
mod svd;

pub use cholesky::{solve_spd, Cholesky};
pub use covariance::{activation_covariance, default_ridge, uncentered_covariance};
pub use matrix::{Matrix, Vector};
pub use qr::{orthonormalize_columns, thin_qr};
pub use subspace::{
    decompose_against_kernel, nullspace_basis, numerical_rank, pseudoinverse, rowspace_basis,
    KernelProjector, KernelSplit,
};
pub use svd::{svd, SvdResult};

#[allow(unused_imports)]
pub(crate) use matrix::dot;
