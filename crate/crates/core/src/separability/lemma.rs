// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::random::{gaussian_vector, orthogonal_matrix, rng};

/// A separator of two labelled point sets written as a combination of
/// cross-class differences, `w = Σ γ_pq (x_p − x_q)`, and hence as
/// `w = Σ α_i x_i` with `Σ α_i = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSeparator {
    pub w: Vector<f64>,
    pub alpha: Vec<f64>,
    /// `min wᵀ(x_p − x_q)` over positive `p`, negative `q`; scaled to 2.
    pub min_gap: f64,
    pub perceptron_updates: usize,
}

const MAX_PERCEPTRON_EPOCHS: usize = 10_000;
const MARGIN_PASSES: usize = 200;

/// Pairwise-difference perceptron followed by a fixed-step subgradient pass
/// on the worst cross pair, then scaled so the smallest cross gap is 2.
pub fn pairwise_separator(points: &Matrix<f64>, labels: &[i8]) -> Result<PairwiseSeparator> {
    ensure_dim("separator labels", points.rows(), labels.len())?;
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == -1).collect();
    if pos.is_empty() || neg.is_empty() || pos.len() + neg.len() != labels.len() {
        return Err(Error::InvalidArgument("labels must be +1/-1 with both classes present".into()));
    }
    let n = points.rows();
    let d = points.cols();
    let diff = |p: usize, q: usize| points.row_vector(p).sub(&points.row_vector(q));
    let mut alpha = vec![0.0; n];
    let mut w = Vector::<f64>::zeros(d);
    let mut updates = 0;

    let mut separated = false;
    for _ in 0..MAX_PERCEPTRON_EPOCHS {
        let mut clean = true;
        for &p in &pos {
            for &q in &neg {
                if w.dot(&diff(p, q)) <= 0.0 {
                    w.axpy(1.0, &diff(p, q));
                    alpha[p] += 1.0;
                    alpha[q] -= 1.0;
                    updates += 1;
                    clean = false;
                }
            }
        }
        if clean {
            separated = true;
            break;
        }
    }
    if !separated {
        return Err(Error::Degenerate("points are not linearly separable".into()));
    }

    let gaps = |w: &Vector<f64>| {
        let mut worst = (f64::INFINITY, 0, 0);
        for &p in &pos {
            for &q in &neg {
                let g = w.dot(&diff(p, q));
                if g < worst.0 {
                    worst = (g, p, q);
                }
            }
        }
        worst
    };
    // Push the unit-norm margin up by stepping along the worst pair.
    for _ in 0..MARGIN_PASSES {
        let norm = w.norm();
        let (_, p, q) = gaps(&w);
        let dv = diff(p, q);
        let step = 0.05 * norm / dv.norm();
        let candidate = w.plus_scaled(step, &dv);
        if gaps(&candidate).0 / candidate.norm() > gaps(&w).0 / norm {
            w = candidate;
            alpha[p] += step;
            alpha[q] -= step;
        }
    }
    let (min_gap, _, _) = gaps(&w);
    let s = 2.0 / min_gap;
    let w = w.scale(s);
    alpha.iter_mut().for_each(|a| *a *= s);
    Ok(PairwiseSeparator { min_gap: gaps(&w).0, w, alpha, perceptron_updates: updates })
}

/// Outcome of transferring a separator through `f(x) = √λ·Q·x + t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityCheck {
    pub n_points: usize,
    pub lambda: f64,
    pub support_size: usize,
    /// `Σ α_i`, zero by construction.
    pub alpha_sum: f64,
    /// Smallest cross-class gap of the original separator (2 after scaling).
    pub original_min_gap: f64,
    /// `min ŵᵀf(x_i)` over positive points.
    pub big_m: f64,
    /// `max ŵᵀf(x_i)` over negative points.
    pub small_m: f64,
    pub bias: f64,
    pub n_correct: usize,
    pub all_correct: bool,
    /// `M − m ≥ 2λ` (up to rounding).
    pub gap_bound_holds: bool,
}

/// Random orthogonal `Q` and Gaussian shift `t` drawn from `seed`.
pub fn lemma_separability_check(points: &Matrix<f64>, labels: &[i8], lambda_iso: f64, seed: u64) -> Result<SeparabilityCheck> {
    let mut g = rng(seed);
    let q = orthogonal_matrix(&mut g, points.cols());
    let t = gaussian_vector(&mut g, points.cols(), 3.0);
    lemma_separability_check_with(points, labels, lambda_iso, &q, &t)
}

/// Transfers a difference-form separator of `points` to `f(points)` exactly
/// as in the separability-preservation argument: β is the cyclic cumulative
/// sum of α over its support, `ŵ = Σ β_j (f(x_{s_j}) − f(x_{s_{j+1}}))`, and
/// the bias is the midpoint of `(m, M)`.
pub fn lemma_separability_check_with(
    points: &Matrix<f64>,
    labels: &[i8],
    lambda_iso: f64,
    q: &Matrix<f64>,
    t: &Vector<f64>,
) -> Result<SeparabilityCheck> {
    if !(lambda_iso > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda_iso}")));
    }
    ensure_dim("isometry rows", points.cols(), q.rows())?;
    ensure_dim("isometry cols", points.cols(), q.cols())?;
    ensure_dim("isometry shift", points.cols(), t.len())?;
    let sep = pairwise_separator(points, labels)?;
    let alpha_sum: f64 = sep.alpha.iter().sum();
    let scale_sum: f64 = sep.alpha.iter().map(|a| a.abs()).sum();
    if alpha_sum.abs() > 1e-9 * scale_sum.max(1.0) {
        return Err(Error::Degenerate(format!("separator coefficients do not sum to zero ({alpha_sum:e})")));
    }

    let f = |i: usize| q.matvec(&points.row_vector(i)).scale(lambda_iso.sqrt()).add(t);
    let support: Vec<usize> = (0..points.rows()).filter(|&i| sep.alpha[i] != 0.0).collect();
    let k = support.len();
    let mut beta = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &s in &support {
        acc += sep.alpha[s];
        beta.push(acc);
    }
    let mut w_hat = Vector::<f64>::zeros(points.cols());
    for j in 0..k {
        let next = support[(j + 1) % k];
        w_hat.axpy(beta[j], &f(support[j]).sub(&f(next)));
    }

    let scores: Vec<f64> = (0..points.rows()).map(|i| w_hat.dot(&f(i))).collect();
    let big_m = (0..scores.len()).filter(|&i| labels[i] == 1).map(|i| scores[i]).fold(f64::INFINITY, f64::min);
    let small_m = (0..scores.len()).filter(|&i| labels[i] == -1).map(|i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
    let bias = 0.5 * (big_m + small_m);
    let n_correct = (0..scores.len()).filter(|&i| (scores[i] - bias > 0.0) == (labels[i] == 1)).count();
    let bound = 2.0 * lambda_iso;
    Ok(SeparabilityCheck {
        n_points: points.rows(),
        lambda: lambda_iso,
        support_size: k,
        alpha_sum,
        original_min_gap: sep.min_gap,
        big_m,
        small_m,
        bias,
        n_correct,
        all_correct: n_correct == points.rows(),
        gap_bound_holds: big_m - small_m >= bound * (1.0 - 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::normal;

    fn clusters(seed: u64, n: usize, d: usize) -> (Matrix<f64>, Vec<i8>) {
        let mut g = rng(seed);
        let labels: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let pts = Matrix::from_fn(n, d, |i, j| if j == 0 { 3.0 * labels[i] as f64 } else { 0.0 } + normal::<f64>(&mut g));
        (pts, labels)
    }

    #[test]
    fn identity_map_preserves_margins() {
        let (pts, labels) = clusters(1, 40, 4);
        let sep = pairwise_separator(&pts, &labels).unwrap();
        assert!((sep.min_gap - 2.0).abs() < 1e-9);
        let r = lemma_separability_check_with(&pts, &labels, 1.0, &Matrix::identity(4), &Vector::zeros(4)).unwrap();
        assert!(r.all_correct && r.gap_bound_holds);
        assert!(r.alpha_sum.abs() < 1e-9);
        assert!((r.big_m - r.small_m - 2.0).abs() < 1e-6 || r.big_m - r.small_m > 2.0);
    }

    #[test]
    fn scaled_rotation_keeps_separability() {
        let (pts, labels) = clusters(2, 100, 8);
        let r = lemma_separability_check(&pts, &labels, 0.25, 9).unwrap();
        assert!(r.all_correct && r.gap_bound_holds, "{r:?}");
    }

    #[test]
    fn shift_is_absorbed_by_bias() {
        let (pts, labels) = clusters(3, 30, 3);
        let a = lemma_separability_check_with(&pts, &labels, 1.0, &Matrix::identity(3), &Vector::zeros(3)).unwrap();
        let b = lemma_separability_check_with(&pts, &labels, 1.0, &Matrix::identity(3), &Vector::from_f64(&[50.0, -7.0, 2.0])).unwrap();
        assert!(a.all_correct && b.all_correct);
        assert!(((a.big_m - a.small_m) - (b.big_m - b.small_m)).abs() < 1e-8);
    }

    #[test]
    fn inseparable_input_is_rejected() {
        let pts = Matrix::from_f64_rows(&[&[0.0], &[1.0], &[2.0]]).unwrap();
        assert!(pairwise_separator(&pts, &[1, -1, 1]).is_err());
    }
}
