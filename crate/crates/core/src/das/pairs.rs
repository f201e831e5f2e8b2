// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ObjectiveSignRule;
use crate::error::{ensure_dim, Result};
use crate::linalg::Vector;
use crate::model_zoo::{sample_example, SyntheticPathwayModel};
use crate::random::{rng, sign};
use crate::scalar::Real;

/// A base/source pair of residual inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PatchPair<T> {
    pub base_input: Vector<T>,
    pub source_input: Vector<T>,
    pub target_logitdiff_sign: i8,
    pub base_label: i8,
    pub source_label: i8,
}

impl<T: Real> PatchPair<T> {
    pub fn new(base_input: Vector<T>, source_input: Vector<T>, base_label: i8, source_label: i8, rule: &ObjectiveSignRule) -> Result<Self> {
        ensure_dim("pair source", base_input.len(), source_input.len())?;
        Ok(Self {
            base_input,
            source_input,
            target_logitdiff_sign: rule.target_sign(base_label, source_label),
            base_label,
            source_label,
        })
    }

    pub fn is_opposite(&self) -> bool {
        self.base_label != self.source_label
    }
}

/// Which label combinations to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMix {
    /// Alternating same-label and opposite-label pairs.
    Balanced,
    OppositeOnly,
    SameOnly,
}

/// `n` pairs, half same-label and half opposite-label, under the default
/// sign rule.
pub fn make_pairs<T: Real>(model: &SyntheticPathwayModel<T>, n: usize, seed: u64) -> Result<Vec<PatchPair<T>>> {
    make_pairs_with(model, n, seed, PairMix::Balanced, &ObjectiveSignRule::default())
}

pub fn make_pairs_with<T: Real>(
    model: &SyntheticPathwayModel<T>,
    n: usize,
    seed: u64,
    mix: PairMix,
    rule: &ObjectiveSignRule,
) -> Result<Vec<PatchPair<T>>> {
    let mut g = rng(seed);
    (0..n)
        .map(|i| {
            let base_label = sign(&mut g);
            let opposite = match mix {
                PairMix::Balanced => i % 2 == 1,
                PairMix::OppositeOnly => true,
                PairMix::SameOnly => false,
            };
            let source_label = if opposite { -base_label } else { base_label };
            let base = sample_example(model, base_label, g.random())?;
            let source = sample_example(model, source_label, g.random())?;
            PatchPair::new(base, source, base_label, source_label, rule)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::SyntheticConfig;

    #[test]
    fn balanced_pairs() {
        let m: SyntheticPathwayModel<f64> = SyntheticConfig { d_resid: 4, d_mlp: 8, ..Default::default() }.build().unwrap();
        let pairs = make_pairs(&m, 10, 3).unwrap();
        assert_eq!(pairs.iter().filter(|p| p.is_opposite()).count(), 5);
        for p in &pairs {
            assert_eq!(p.target_logitdiff_sign, p.source_label);
        }
        assert_eq!(pairs, make_pairs(&m, 10, 3).unwrap());
        assert_ne!(pairs, make_pairs(&m, 10, 4).unwrap());
    }
}
