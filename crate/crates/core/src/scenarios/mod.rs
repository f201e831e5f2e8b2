// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named, seeded experiment runners. Each runner is a pure function of its
//! configuration and returns the files it wants written plus the checks it
//! asserted; [`run_scenario`] persists them with a manifest.

mod config;
mod illusion_synth;
mod output;
mod rome_roundtrip;
mod separability;
mod toy;

use std::path::Path;

use rand::RngCore;

pub use config::{ExperimentConfig, Scenario};
pub use illusion_synth::{run_illusion_synth, train_and_analyze, IllusionSynthReport, SiteResult};
pub use output::{persist, write_atomic, Check, Clock, RunManifest, RunRecord, ScenarioOutput, MANIFEST_FILE, SUMMARY_FILE};
pub use rome_roundtrip::{
    alpha_curve_instance, exact_recovery_instance, median, model_covariance, model_pair_suite, patch_edit_instance,
    random_layer, rome_instance, run_rome_roundtrip, AlphaCurve, CurvePoint, ExactRecovery, ModelPairMetrics,
    PatchEditInstance, RomeInstance, RomeRoundtripReport,
};
pub use separability::{inversions, isometry_self_test, run_separability, separable_dataset, REFERENCE_ACCURACY};
pub use toy::{run_toy, TOY_TOL};

use crate::error::Result;
use crate::random::substream;

/// An independent child seed for a numbered sub-task of a run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    substream(seed, stream).next_u64()
}

/// Runs the scenario in memory without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    match config.scenario {
        Scenario::Toy => run_toy(config),
        Scenario::IllusionSynth => run_illusion_synth(config),
        Scenario::RomeRoundtrip => run_rome_roundtrip(config),
        Scenario::Separability => run_separability(config),
    }
}

/// Validates, runs, and writes every output plus `manifest.json` into
/// `out_dir`.
pub fn run_scenario(config: &ExperimentConfig, out_dir: &Path, clock: Clock) -> Result<RunRecord> {
    config.validate()?;
    let started = clock.now();
    let output = execute(config)?;
    persist(config, &output, out_dir, started, clock)
}
