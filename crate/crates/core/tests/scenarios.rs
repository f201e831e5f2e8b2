// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;

use patchlab::scenarios::{execute, run_scenario, Clock, ExperimentConfig, Scenario, MANIFEST_FILE};

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_scenario(&ExperimentConfig::defaults(Scenario::Toy), dir.path(), Clock::Fixed(7)).unwrap();
    let on_disk: BTreeSet<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST_FILE)
        .collect();
    let listed: BTreeSet<String> = rec.manifest.files.iter().cloned().collect();
    assert_eq!(on_disk, listed);
    assert_eq!((rec.manifest.started_at, rec.manifest.finished_at), (7, 7));
    assert_eq!(rec.exit_code(), 0);
    let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(text.contains(&rec.manifest.config_hash));
}

#[test]
fn rotated_toy_passes_and_keeps_function_values() {
    let mut cfg = ExperimentConfig::defaults(Scenario::Toy);
    cfg.rotated = Some(true);
    let out = execute(&cfg).unwrap();
    assert!(out.all_passed(), "{}", out.summary(Scenario::Toy));
    let plain = execute(&ExperimentConfig::defaults(Scenario::Toy)).unwrap();
    let col = |o: &patchlab::scenarios::ScenarioOutput, name: &str| -> Vec<String> {
        let text = String::from_utf8(o.files.iter().find(|f| f.0.ends_with(".csv")).unwrap().1.clone()).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let j = header.iter().position(|h| *h == name).unwrap();
        lines.map(|l| l.split(',').nth(j).unwrap().to_string()).collect()
    };
    // Outputs agree to full precision on the exactly representable ones;
    // the illusory column carries rounding from the rotation.
    assert_eq!(col(&out, "e3_patch").len(), 441);
    assert_eq!(col(&out, "x_prime"), col(&plain, "x_prime"));
}

#[test]
fn defaults_are_accepted_unmodified() {
    for sc in Scenario::ALL {
        let text = ExperimentConfig::defaults(sc).to_json_pretty();
        ExperimentConfig::from_json(&text).unwrap();
    }
}

#[test]
fn config_rejections() {
    assert!(ExperimentConfig::from_json(r#"{"scenario":"illusion-synth","pair_count":0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"scenario":"rome-roundtrip","alpha_sq_grid":[]}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"scenario":"separability","z_values":[-1.0]}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"scenario":"nope"}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"scenario":"toy","grid_min":1,"grid_max":0}"#).is_err());
}

#[test]
fn seed_changes_hash_but_output_dir_does_not() {
    let a = ExperimentConfig::defaults(Scenario::Separability);
    let mut b = a.clone();
    b.output_dir = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    b.seed = 9;
    assert_ne!(a.hash(), b.hash());
}
