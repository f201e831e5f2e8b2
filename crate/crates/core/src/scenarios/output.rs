// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use crate::error::{Error, Result};
use crate::report::CsvTable;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Source of run timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    /// Seconds since the Unix epoch from the system clock, unless
    /// `SOURCE_DATE_EPOCH` is set.
    System,
    Fixed(u64),
}

impl Clock {
    pub fn now(self) -> u64 {
        match self {
            Clock::Fixed(t) => t,
            Clock::System => std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
        }
    }
}

/// One embedded assertion of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Advisory checks are reported but do not affect the exit status.
    pub advisory: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into(), advisory: false }
    }

    pub fn advisory(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { advisory: true, ..Self::new(name, passed, detail) }
    }
}

/// Everything a scenario produced, before it touches the filesystem.
#[derive(Clone, Debug, Default)]
pub struct ScenarioOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl ScenarioOutput {
    pub fn csv(&mut self, name: &str, table: &CsvTable) {
        self.files.push((name.to_string(), table.to_csv_string().into_bytes()));
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.advisory)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && !c.advisory)
    }

    /// Human-readable report with a failures section when anything failed.
    pub fn summary(&self, scenario: Scenario) -> String {
        let mut s = format!("scenario: {scenario}\n\nchecks:\n");
        for c in &self.checks {
            let status = match (c.passed, c.advisory) {
                (true, _) => "PASS",
                (false, true) => "ADVISORY",
                (false, false) => "FAIL",
            };
            s.push_str(&format!("  [{status}] {}: {}\n", c.name, c.detail));
        }
        let failures: Vec<_> = self.failures().collect();
        if failures.is_empty() {
            s.push_str("\nresult: all checks passed\n");
        } else {
            s.push_str("\nfailures:\n");
            for c in failures {
                s.push_str(&format!("  {}: {}\n", c.name, c.detail));
            }
            s.push_str("\nresult: FAILED\n");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub config_hash: String,
    pub artifact_version: String,
    pub started_at: u64,
    pub finished_at: u64,
    pub files: Vec<String>,
    pub all_checks_passed: bool,
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Result of a completed run on disk.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub summary: String,
    pub out_dir: PathBuf,
}

impl RunRecord {
    /// 0 when every non-advisory check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.all_checks_passed {
            0
        } else {
            1
        }
    }
}

/// Writes the scenario files, the summary, and finally the manifest.
pub fn persist(
    config: &ExperimentConfig,
    output: &ScenarioOutput,
    out_dir: &Path,
    started_at: u64,
    clock: Clock,
) -> Result<RunRecord> {
    fs::create_dir_all(out_dir)?;
    let summary = output.summary(config.scenario);
    let mut files = Vec::with_capacity(output.files.len() + 2);
    for (name, bytes) in &output.files {
        write_atomic(&out_dir.join(name), bytes)?;
        files.push(name.clone());
    }
    let resolved_name = "config.resolved.json".to_string();
    let mut cfg_text = config.resolved().to_json_pretty();
    cfg_text.push('\n');
    write_atomic(&out_dir.join(&resolved_name), cfg_text.as_bytes())?;
    files.push(resolved_name);
    write_atomic(&out_dir.join(SUMMARY_FILE), summary.as_bytes())?;
    files.push(SUMMARY_FILE.to_string());
    let manifest = RunManifest {
        scenario: config.scenario,
        config_hash: config.hash(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: clock.now(),
        files,
        all_checks_passed: output.all_passed(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(RunRecord { manifest, summary, out_dir: out_dir.to_path_buf() })
}
