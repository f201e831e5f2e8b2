// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::das::DasConfig;
use crate::error::{Error, Result};
use crate::model_zoo::SyntheticConfig;
use crate::patching::Site;
use crate::rome::DEFAULT_ALPHA_SQ_GRID;

/// The named experiments the runner knows about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Toy,
    IllusionSynth,
    RomeRoundtrip,
    Separability,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Toy, Scenario::IllusionSynth, Scenario::RomeRoundtrip, Scenario::Separability];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Toy => "toy",
            Scenario::IllusionSynth => "illusion-synth",
            Scenario::RomeRoundtrip => "rome-roundtrip",
            Scenario::Separability => "separability",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Configuration for one scenario run. Fields that do not apply to the
/// chosen scenario must be absent; applicable fields that are absent take
/// the scenario default (see [`ExperimentConfig::defaults`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,

    // toy
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotated: Option<bool>,

    // synthetic-model scenarios
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SyntheticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub das: Option<DasConfig>,
    /// Training pairs for DAS, or model pairs for the edit comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_pair_count: Option<usize>,

    // rome-roundtrip
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_sq_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo_samples: Option<usize>,

    // separability
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry_lambda: Option<f64>,
}

impl ExperimentConfig {
    fn empty(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            output_dir: None,
            grid_points: None,
            grid_min: None,
            grid_max: None,
            rotated: None,
            model: None,
            das: None,
            pair_count: None,
            eval_pair_count: None,
            alpha_sq_grid: None,
            instance_count: None,
            perturbation_count: None,
            monte_carlo_samples: None,
            z_values: None,
            n_per_z: None,
            direction_count: None,
            dataset_count: None,
            isometry_lambda: None,
        }
    }

    /// The complete default configuration of a scenario.
    pub fn defaults(scenario: Scenario) -> Self {
        let mut c = Self::empty(scenario);
        match scenario {
            Scenario::Toy => {
                c.grid_points = Some(21);
                c.grid_min = Some(-5.0);
                c.grid_max = Some(5.0);
                c.rotated = Some(false);
            }
            Scenario::IllusionSynth => {
                c.model = Some(SyntheticConfig::default());
                c.das = Some(DasConfig::default());
                c.pair_count = Some(256);
                c.eval_pair_count = Some(1000);
            }
            Scenario::RomeRoundtrip => {
                c.model = Some(SyntheticConfig::default());
                c.alpha_sq_grid = Some(DEFAULT_ALPHA_SQ_GRID.to_vec());
                c.pair_count = Some(20);
                c.instance_count = Some(50);
                c.perturbation_count = Some(1000);
                c.monte_carlo_samples = Some(100_000);
            }
            Scenario::Separability => {
                c.model = Some(SyntheticConfig::default());
                c.z_values = Some(vec![1e-4, 1e-3, 1e-2, 1e-1]);
                c.n_per_z = Some(2000);
                c.direction_count = Some(4);
                c.dataset_count = Some(20);
                c.isometry_lambda = Some(0.37);
            }
        }
        c
    }

    /// Strict JSON parsing followed by validation.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fills every absent applicable field from the scenario defaults.
    pub fn resolved(&self) -> Self {
        let d = Self::defaults(self.scenario);
        Self {
            scenario: self.scenario,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            grid_points: self.grid_points.or(d.grid_points),
            grid_min: self.grid_min.or(d.grid_min),
            grid_max: self.grid_max.or(d.grid_max),
            rotated: self.rotated.or(d.rotated),
            model: self.model.clone().or(d.model),
            das: self.das.clone().or(d.das),
            pair_count: self.pair_count.or(d.pair_count),
            eval_pair_count: self.eval_pair_count.or(d.eval_pair_count),
            alpha_sq_grid: self.alpha_sq_grid.clone().or(d.alpha_sq_grid),
            instance_count: self.instance_count.or(d.instance_count),
            perturbation_count: self.perturbation_count.or(d.perturbation_count),
            monte_carlo_samples: self.monte_carlo_samples.or(d.monte_carlo_samples),
            z_values: self.z_values.clone().or(d.z_values),
            n_per_z: self.n_per_z.or(d.n_per_z),
            direction_count: self.direction_count.or(d.direction_count),
            dataset_count: self.dataset_count.or(d.dataset_count),
            isometry_lambda: self.isometry_lambda.or(d.isometry_lambda),
        }
    }

    /// Rejects fields that do not belong to the scenario and out-of-range
    /// values.
    pub fn validate(&self) -> Result<()> {
        let d = Self::defaults(self.scenario);
        let present: [(&str, bool, bool); 17] = [
            ("grid_points", self.grid_points.is_some(), d.grid_points.is_some()),
            ("grid_min", self.grid_min.is_some(), d.grid_min.is_some()),
            ("grid_max", self.grid_max.is_some(), d.grid_max.is_some()),
            ("rotated", self.rotated.is_some(), d.rotated.is_some()),
            ("model", self.model.is_some(), d.model.is_some()),
            ("das", self.das.is_some(), d.das.is_some()),
            ("pair_count", self.pair_count.is_some(), d.pair_count.is_some()),
            ("eval_pair_count", self.eval_pair_count.is_some(), d.eval_pair_count.is_some()),
            ("alpha_sq_grid", self.alpha_sq_grid.is_some(), d.alpha_sq_grid.is_some()),
            ("instance_count", self.instance_count.is_some(), d.instance_count.is_some()),
            ("perturbation_count", self.perturbation_count.is_some(), d.perturbation_count.is_some()),
            ("monte_carlo_samples", self.monte_carlo_samples.is_some(), d.monte_carlo_samples.is_some()),
            ("z_values", self.z_values.is_some(), d.z_values.is_some()),
            ("n_per_z", self.n_per_z.is_some(), d.n_per_z.is_some()),
            ("direction_count", self.direction_count.is_some(), d.direction_count.is_some()),
            ("dataset_count", self.dataset_count.is_some(), d.dataset_count.is_some()),
            ("isometry_lambda", self.isometry_lambda.is_some(), d.isometry_lambda.is_some()),
        ];
        for (name, given, applies) in present {
            if given && !applies {
                return Err(Error::Config(format!("field `{name}` does not apply to scenario {}", self.scenario)));
            }
        }

        let r = self.resolved();
        let positive = |name: &str, v: Option<usize>| match v {
            Some(0) => Err(Error::Config(format!("{name} must be positive"))),
            _ => Ok(()),
        };
        positive("pair_count", r.pair_count)?;
        positive("eval_pair_count", r.eval_pair_count)?;
        positive("instance_count", r.instance_count)?;
        positive("perturbation_count", r.perturbation_count)?;
        positive("monte_carlo_samples", r.monte_carlo_samples)?;
        positive("direction_count", r.direction_count)?;
        positive("dataset_count", r.dataset_count)?;
        if let Some(n) = r.grid_points {
            if n < 2 {
                return Err(Error::Config("grid_points must be at least 2".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (r.grid_min, r.grid_max) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("grid range [{lo}, {hi}] is empty")));
            }
        }
        if let Some(m) = &r.model {
            m.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(das) = &r.das {
            das.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(grid) = &r.alpha_sq_grid {
            if grid.is_empty() {
                return Err(Error::Config("alpha_sq_grid must not be empty".into()));
            }
            if grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::Config("alpha_sq_grid values must be positive and finite".into()));
            }
        }
        if let Some(z) = &r.z_values {
            if z.is_empty() {
                return Err(Error::Config("z_values must not be empty".into()));
            }
            if z.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::Config("z_values must be nonnegative and finite".into()));
            }
        }
        if let Some(n) = r.n_per_z {
            if n < 10 {
                return Err(Error::Config("n_per_z must be at least 10".into()));
            }
        }
        if let Some(l) = r.isometry_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("isometry_lambda must be positive".into()));
            }
        }
        if self.scenario == Scenario::IllusionSynth {
            if let Some(das) = &self.das {
                if das.site != Site::MlpPostAct {
                    return Err(Error::Config("das.site is fixed by the scenario; leave it at mlp_post_act".into()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON of the resolved configuration, hex. The
    /// output directory does not take part.
    pub fn hash(&self) -> String {
        let mut r = self.resolved();
        r.output_dir = None;
        let json = serde_json::to_string(&r).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_validate() {
        for sc in Scenario::ALL {
            let d = ExperimentConfig::defaults(sc);
            d.validate().unwrap();
            let back = ExperimentConfig::from_json(&d.to_json_pretty()).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.resolved(), d);
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
    }

    #[test]
    fn strictness() {
        assert!(ExperimentConfig::from_json(r#"{"scenario":"toy","bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario":"toy","z_values":[0.1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario":"illusion-synth","pair_count":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario":"rome-roundtrip","alpha_sq_grid":[]}"#).is_err());
        let minimal = ExperimentConfig::from_json(r#"{"scenario":"separability","seed":4}"#).unwrap();
        assert_eq!(minimal.resolved().n_per_z, Some(2000));
    }

    #[test]
    fn hash_depends_on_content_only() {
        let a = ExperimentConfig::defaults(Scenario::Toy);
        let mut b = ExperimentConfig::empty(Scenario::Toy);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
