// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use patchlab::scenarios::{ExperimentConfig, Scenario};

fn patchlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchlab"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("spawn patchlab")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn defaults_print_valid_configs() {
    for sc in Scenario::ALL {
        let out = patchlab(&["defaults", sc.name()]);
        assert!(out.status.success());
        let cfg = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(cfg.scenario, sc);
    }
    assert_eq!(patchlab(&["defaults", "nope"]).status.code(), Some(2));
}

#[test]
fn toy_run_succeeds_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = patchlab(&["toy", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[PASS]"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["started_at"], 1700000000);
    assert_eq!(manifest["all_checks_passed"], true);
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"scenario":"toy","grid_pointz":5}"#).unwrap();
    let out = patchlab(&["toy", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("grid_pointz"));
}

#[test]
fn scenario_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.json");
    std::fs::write(&cfg, r#"{"scenario":"toy"}"#).unwrap();
    let out = patchlab(&["separability", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.json");
    std::fs::write(&cfg, r#"{"scenario":"toy","seed":3}"#).unwrap();
    let o = dir.path().join("o");
    let out = patchlab(&["toy", "--config", path(&cfg), "--seed", "11", "--out", path(&o)]);
    assert_eq!(out.status.code(), Some(0));
    let resolved = ExperimentConfig::from_path(&o.join("config.resolved.json")).unwrap();
    assert_eq!(resolved.seed, 11);
}
