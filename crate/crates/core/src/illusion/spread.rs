// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::report::{format_g17, CsvTable};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpread {
    pub label: i8,
    pub mean: f64,
    /// Sample standard deviation (0 for a single example).
    pub std: f64,
    pub count: usize,
}

/// Class-conditional statistics of projections onto one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpread {
    /// One entry per class, `-1` first.
    pub classes: Vec<ClassSpread>,
}

impl ProjectionSpread {
    pub fn class(&self, label: i8) -> Option<&ClassSpread> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// `|mean₊ − mean₋|`.
    pub fn mean_gap(&self) -> f64 {
        match (self.class(1), self.class(-1)) {
            (Some(p), Some(n)) => (p.mean - n.mean).abs(),
            _ => f64::NAN,
        }
    }

    /// Mean gap divided by the pooled standard deviation.
    pub fn separation(&self) -> f64 {
        let (Some(p), Some(n)) = (self.class(1), self.class(-1)) else {
            return f64::NAN;
        };
        let dof = (p.count + n.count).saturating_sub(2).max(1) as f64;
        let pooled = (((p.count.max(1) - 1) as f64 * p.std * p.std + (n.count.max(1) - 1) as f64 * n.std * n.std) / dof).sqrt();
        self.mean_gap() / pooled
    }
}

fn projections<T: Real>(direction: &Vector<T>, activations: &Matrix<T>, labels: &[i8]) -> Result<Vec<f64>> {
    ensure_dim("spread labels", activations.rows(), labels.len())?;
    ensure_dim("spread direction", activations.cols(), direction.len())?;
    if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument(format!("labels must be +1 or -1, got {bad}")));
    }
    Ok(activations.matvec(direction).iter().map(|p| p.as_f64()).collect())
}

pub fn projection_spread<T: Real>(direction: &Vector<T>, activations: &Matrix<T>, labels: &[i8]) -> Result<ProjectionSpread> {
    let proj = projections(direction, activations, labels)?;
    let mut classes = Vec::with_capacity(2);
    for label in [-1i8, 1] {
        let vals: Vec<f64> = proj.iter().zip(labels).filter(|(_, &l)| l == label).map(|(p, _)| *p).collect();
        if vals.is_empty() {
            return Err(Error::Empty(if label == 1 { "class +1" } else { "class -1" }));
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        classes.push(ClassSpread { label, mean, std: var.sqrt(), count: vals.len() });
    }
    Ok(ProjectionSpread { classes })
}

/// `label,projection` rows for offline histograms.
pub fn spread_csv<T: Real>(direction: &Vector<T>, activations: &Matrix<T>, labels: &[i8]) -> Result<CsvTable> {
    let proj = projections(direction, activations, labels)?;
    let mut t = CsvTable::new(&["label", "projection"]);
    for (p, l) in proj.iter().zip(labels) {
        t.push_row(vec![l.to_string(), format_g17(*p)]);
    }
    Ok(t)
}
