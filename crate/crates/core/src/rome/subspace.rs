// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{pseudoinverse, Cholesky, KernelProjector, Matrix, Vector};
use crate::scalar::Real;

/// Default grid of `α²` values.
pub const DEFAULT_ALPHA_SQ_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Solution for one grid value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha_sq: f64,
    /// `‖a‖²·(b + αv)ᵀΣ(b + αv)`: total variance of the difference between
    /// the edit's and the intervention's contributions.
    pub objective: f64,
    /// `α⁴zᵀΣz + 2α²bᵀΣz` with `v = αz`, the objective without its constant
    /// term and factor.
    pub reduced_objective: f64,
    /// `‖W_out w‖` before `w` was projected onto the kernel.
    pub constraint_violation: f64,
    /// `|cos(v, b)|`.
    pub cos_with_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SubspaceApproxResult<T> {
    /// Unnormalized intervention direction.
    pub v: Vector<T>,
    pub alpha: f64,
    pub alpha_sq: f64,
    pub objective_value: f64,
    pub constraint_violation: f64,
    pub curve: Vec<AlphaPoint>,
}

/// Finds `v` such that the zero-target intervention `x ↦ x − (vᵀx)v` on the
/// input of `W_out` best matches the rank-1 edit `W_out + a bᵀ` in
/// contribution variance under covariance `Σ`, with `W_out v = α a`.
///
/// For each `α²` on the grid the stationarity system is solved in closed
/// form; the grid point with the smallest objective wins (ties go to the
/// smaller `α²`).
pub fn edit_to_subspace<T: Real>(
    a: &Vector<T>,
    b: &Vector<T>,
    w_out: &Matrix<T>,
    sigma: &Matrix<T>,
    alpha_sq_grid: &[f64],
) -> Result<SubspaceApproxResult<T>> {
    ensure_dim("edit a", w_out.rows(), a.len())?;
    ensure_dim("edit b", w_out.cols(), b.len())?;
    ensure_dim("covariance", w_out.cols(), sigma.rows())?;
    if a.norm() == T::zero() {
        return Err(Error::ZeroVector("edit_to_subspace a"));
    }
    if alpha_sq_grid.is_empty() {
        return Err(Error::Empty("alpha_sq_grid"));
    }
    if let Some(bad) = alpha_sq_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!("alpha_sq values must be positive, got {bad}")));
    }

    let sigma_chol = Cholesky::factor(sigma)?;
    // Σ⁻¹Wᵀ, then M = W Σ⁻¹ Wᵀ.
    let sinv_wt = sigma_chol.solve_matrix(&w_out.transpose())?;
    let m = w_out.matmul(&sinv_wt);
    let m = m.add(&m.transpose()).scale(T::lit(0.5));
    let m_chol = Cholesky::factor(&m).map_err(|_| {
        Error::Degenerate("W_out Σ⁻¹ W_outᵀ is not positive definite; W_out is rank-deficient".into())
    })?;
    let pinv_a = pseudoinverse(w_out, None)?.matvec(a);
    let kernel = KernelProjector::new(w_out)?;
    let wb = w_out.matvec(b);
    let a_sq = a.norm_sq();
    let sigma_b = sigma.matvec(b);

    let mut best: Option<(usize, Vector<T>)> = None;
    let mut curve = Vec::with_capacity(alpha_sq_grid.len());
    for (idx, &s_f) in alpha_sq_grid.iter().enumerate() {
        let s = T::lit(s_f);
        let rhs = wb.scale(-T::lit(2.0) * s).plus_scaled(-T::lit(2.0) * s * s, a);
        let lambda = m_chol.solve(&rhs)?;
        let w = pinv_a
            .scale(-T::one())
            .plus_scaled(-T::one() / s, b)
            .plus_scaled(-T::one() / (T::lit(2.0) * s * s), &sinv_wt.matvec(&lambda));
        let violation = w_out.matvec(&w).norm();
        let w = kernel.project_null(&w);
        let z = pinv_a.add(&w);
        let v = z.scale(s.sqrt());
        let sigma_z = sigma.matvec(&z);
        let reduced = s * s * z.dot(&sigma_z) + T::lit(2.0) * s * sigma_b.dot(&z);
        let e = b.plus_scaled(s, &z);
        let objective = a_sq * e.dot(&sigma.matvec(&e));
        let cos_with_b = if v.norm() > T::zero() && b.norm() > T::zero() {
            (v.dot(b) / (v.norm() * b.norm())).abs().as_f64()
        } else {
            0.0
        };
        let point = AlphaPoint {
            alpha_sq: s_f,
            objective: objective.as_f64(),
            reduced_objective: reduced.as_f64(),
            constraint_violation: violation.as_f64(),
            cos_with_b,
        };
        let better = match &best {
            None => true,
            Some((j, _)) => {
                let prev: &AlphaPoint = &curve[*j];
                point.objective < prev.objective || (point.objective == prev.objective && point.alpha_sq < prev.alpha_sq)
            }
        };
        curve.push(point);
        if better {
            best = Some((idx, v));
        }
    }
    let (idx, v) = best.expect("nonempty grid");
    let p = curve[idx];
    Ok(SubspaceApproxResult {
        v,
        alpha: p.alpha_sq.sqrt(),
        alpha_sq: p.alpha_sq,
        objective_value: p.objective,
        constraint_violation: p.constraint_violation,
        curve,
    })
}
