// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gradient search for patching subspaces that maximize the causal effect of
//! an interchange intervention. Gradients are derived by hand through the
//! unembedding, the skip connection, the MLP and the patch operator.

mod config;
mod grad;
mod pairs;
mod train;

pub use config::{DasConfig, ObjectiveDirection, ObjectiveSignRule};
pub use grad::{das_grad, das_loss, downstream_gradient, PreparedPair};
pub use pairs::{make_pairs, make_pairs_with, PairMix, PatchPair};
pub use train::{das_train, das_train_with_trace, trace_csv, DasRun, TracePoint};
