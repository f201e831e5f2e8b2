// SPDX-License-Identifier: MIT OR Apache-2.0

//! Patch-strength metrics and the detection procedure for illusory
//! directions: split a direction against the kernel of the weights that
//! read the site, and compare the effect of patching each part.

mod analyze;
mod angle;
mod metrics;
mod spread;

pub use analyze::{analyze_direction, evaluate_intervention, site_reader, IllusionReport, InterventionMetrics};
pub use angle::{optimal_angle_scan, uniform_angle_grid, AngleScan};
pub use metrics::{
    cosine, fldd, interchange_accuracy, rewrite_score, summarize_fldd, variance_ratio, FlddSummary, FlipRule,
    FLDD_EPSILON,
};
pub use spread::{projection_spread, spread_csv, ClassSpread, ProjectionSpread};
