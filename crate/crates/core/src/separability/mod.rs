// SPDX-License-Identifier: MIT OR Apache-2.0

//! Does information that is linearly present in the residual stream
//! survive the MLP nonlinearity and the projection onto `ker W_out`?
//! Distortion regressions on quadruple inner products, logistic and ridge
//! probes, and a constructive check of separability under a scaled
//! isometry.

mod lemma;
mod probe;
mod quadruple;
mod regression;

pub use lemma::{lemma_separability_check, lemma_separability_check_with, pairwise_separator, PairwiseSeparator, SeparabilityCheck};
pub use probe::{injected_direction_experiment, logistic_probe, logistic_probe_detailed, ProbeFit, ProbeResult, ProbeSettings};
pub use quadruple::{distortion_fit, distortion_regression, sample_quadruple_products, QuadrupleSample};
pub use regression::{ridge_regression, ridge_regression_multi, residual_projection_regression, RegressionFit, DEFAULT_RIDGE};
