// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patching::Site;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveDirection {
    Maximize,
    Minimize,
}

impl ObjectiveDirection {
    pub fn sign(self) -> i8 {
        match self {
            ObjectiveDirection::Maximize => 1,
            ObjectiveDirection::Minimize => -1,
        }
    }
}

/// What to do with the base example's clean-sign logit difference for
/// each pair type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSignRule {
    pub same_label: ObjectiveDirection,
    pub opposite_label: ObjectiveDirection,
}

impl Default for ObjectiveSignRule {
    fn default() -> Self {
        Self {
            same_label: ObjectiveDirection::Maximize,
            opposite_label: ObjectiveDirection::Minimize,
        }
    }
}

impl ObjectiveSignRule {
    /// Sign the patched logit difference should take.
    pub fn target_sign(&self, base_label: i8, source_label: i8) -> i8 {
        let dir = if base_label == source_label { self.same_label } else { self.opposite_label };
        base_label * dir.sign()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DasConfig {
    pub subspace_dim: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub site: Site,
    #[serde(default)]
    pub objective_sign_rule: ObjectiveSignRule,
}

impl Default for DasConfig {
    fn default() -> Self {
        Self {
            subspace_dim: 1,
            learning_rate: 0.05,
            steps: 500,
            batch_size: 32,
            seed: 0,
            site: Site::MlpPostAct,
            objective_sign_rule: ObjectiveSignRule::default(),
        }
    }
}

impl DasConfig {
    pub fn at_site(mut self, site: Site) -> Self {
        self.site = site;
        self
    }

    /// A zero learning rate is accepted and leaves the initialization in
    /// place; it is useful as a control.
    pub fn validate(&self) -> Result<()> {
        if self.subspace_dim == 0 {
            return Err(Error::Config("das.subspace_dim must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("das.steps must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("das.batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("das.learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_targets_source_label() {
        let r = ObjectiveSignRule::default();
        for b in [-1i8, 1] {
            for s in [-1i8, 1] {
                assert_eq!(r.target_sign(b, s), s);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(DasConfig::default().validate().is_ok());
        assert!(DasConfig { subspace_dim: 0, ..DasConfig::default() }.validate().is_err());
        assert!(DasConfig { learning_rate: -1.0, ..DasConfig::default() }.validate().is_err());
        let json = serde_json::to_string(&DasConfig::default()).unwrap();
        assert!(json.contains("\"site\":\"mlp_post_act\""));
        assert!(serde_json::from_str::<DasConfig>(&json.replace("\"seed\"", "\"sed\"")).is_err());
    }
}
