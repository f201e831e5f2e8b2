// SPDX-License-Identifier: MIT OR Apache-2.0

//! The analyzable models: a three-unit toy network computing the identity,
//! its rotated reparametrization, and a residual-stream model with a random
//! MLP in the middle.

mod activation;
mod mlp;
mod synthetic;
mod toy;

pub use activation::{gelu, gelu_derivative, gelu_vec, normal_cdf, normal_pdf};
pub use mlp::{make_random_mlp, standard_normal_inputs, MlpLayer, BIAS_STD, CALIBRATION_SAMPLES};
pub use synthetic::{
    build_synthetic, forward_with_cache, sample_example, ActivationCache, SyntheticConfig, SyntheticPathwayModel,
};
pub use toy::{rotated_toy_forward, toy_forward, RotatedToyNet, ToyNet};
