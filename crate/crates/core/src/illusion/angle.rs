// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::analyze::site_reader;
use crate::das::PatchPair;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model_zoo::SyntheticPathwayModel;
use crate::patching::{check_unit, patch_1d, Site};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleScan {
    pub best_angle: f64,
    /// `(angle, effect)` for every grid point.
    pub curve: Vec<(f64, f64)>,
    /// Largest `|v_dormᵀ(source − base)|` seen; zero under strict dormancy.
    pub max_dormant_gap: f64,
    /// Set when the dormant projections were not constant across the pairs.
    pub dormancy_violated: bool,
}

/// `n + 1` equally spaced angles covering `[0, π/2]`.
pub fn uniform_angle_grid(n: usize) -> Vec<f64> {
    let step = std::f64::consts::FRAC_PI_2 / n.max(1) as f64;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Patches along `cos α·v_disc + sin α·v_dorm` for every `α` of the grid
/// and records the mean absolute change of the projection on `v_dorm`.
/// With constant dormant projections the effect is `|cos α sin α|` times the
/// mean kernel-projection gap, so the grid maximizer sits at `π/4`.
pub fn optimal_angle_scan<T: Real>(
    model: &SyntheticPathwayModel<T>,
    v_disc: &Vector<T>,
    v_dorm: &Vector<T>,
    site: Site,
    eval_pairs: &[PatchPair<T>],
    angle_grid: &[f64],
) -> Result<AngleScan> {
    check_unit(v_disc)?;
    check_unit(v_dorm)?;
    if eval_pairs.is_empty() || angle_grid.is_empty() {
        return Err(Error::Empty("angle scan inputs"));
    }
    if let Some(a) = angle_grid.iter().find(|a| !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(*a)) {
        return Err(Error::InvalidArgument(format!("angle {a} outside [0, pi/2]")));
    }
    let reader = site_reader(model, site);
    let leak = reader.matvec(v_disc).norm();
    if leak > T::lit(1e-9) * reader.frobenius_norm().max(T::one()) {
        return Err(Error::NotInKernel(leak.as_f64()));
    }
    let overlap = v_disc.dot(v_dorm).abs();
    if overlap > T::lit(1e-8) {
        return Err(Error::InvalidArgument(format!("v_disc and v_dorm overlap by {}", overlap.as_f64())));
    }

    let mut acts = Vec::with_capacity(eval_pairs.len());
    let mut max_gap = 0.0f64;
    let mut scale = 0.0f64;
    for p in eval_pairs {
        let base = model.forward(&p.base_input)?.get(site).clone();
        let src = model.forward(&p.source_input)?.get(site).clone();
        max_gap = max_gap.max(v_dorm.dot(&src.sub(&base)).abs().as_f64());
        scale = scale.max(src.norm().as_f64()).max(base.norm().as_f64());
        acts.push((base, src));
    }

    let mut curve = Vec::with_capacity(angle_grid.len());
    for &alpha in angle_grid {
        let dir = v_disc.scale(T::lit(alpha.cos())).plus_scaled(T::lit(alpha.sin()), v_dorm);
        let dir = dir.normalized()?;
        let mut total = 0.0;
        for (base, src) in &acts {
            let patched = patch_1d(base, src, &dir)?;
            total += v_dorm.dot(&patched.sub(base)).abs().as_f64();
        }
        curve.push((alpha, total / acts.len() as f64));
    }
    let best_angle = curve
        .iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, &(a, e)| if e > best.1 { (a, e) } else { best })
        .0;
    Ok(AngleScan {
        best_angle,
        curve,
        max_dormant_gap: max_gap,
        dormancy_violated: max_gap > 1e-9 * scale.max(1.0),
    })
}
