// SPDX-License-Identifier: MIT OR Apache-2.0

//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Jacobi is slower than Golub–Kahan but computes small singular values to
//! high relative accuracy, which the rank and nullspace routines rely on.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// `A = U · diag(s) · Vᵀ` with `U` m×r, `V` n×r and `r = min(m, n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SvdResult<T> {
    pub u: Matrix<T>,
    pub singular_values: Vector<T>,
    pub v: Matrix<T>,
}

impl<T: Real> SvdResult<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.u.clone();
        for j in 0..us.cols() {
            let s = self.singular_values[j];
            for i in 0..us.rows() {
                us[(i, j)] = us[(i, j)] * s;
            }
        }
        us.matmul(&self.v.transpose())
    }

    pub fn largest(&self) -> T {
        if self.singular_values.is_empty() {
            T::zero()
        } else {
            self.singular_values[0]
        }
    }

    /// Default rank tolerance: `σ_max · max(m, n) · 1e-12`, floored at the
    /// type's epsilon scale so `f32` does not over-report rank.
    pub fn default_tolerance(&self) -> T {
        let dim = T::lit(self.u.rows().max(self.v.rows()) as f64);
        let rel = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
        self.largest() * dim * rel
    }

    /// Number of singular values strictly above `tol`.
    pub fn rank(&self, tol: T) -> usize {
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }
}

/// Computes the thin SVD of `a`.
pub fn svd<T: Real>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(m, 0),
            singular_values: Vector::zeros(0),
            v: Matrix::zeros(n, 0),
        });
    }
    if m >= n {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

// Requires m >= n. Works on columns stored contiguously.
fn jacobi_tall<T: Real>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j).into_vec()).collect();
    let mut vcols: Vec<Vec<T>> = (0..n).map(|j| Vector::<T>::basis(n, j).into_vec()).collect();
    let eps = T::epsilon();

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps });
    }

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    // Stable sort keeps the result deterministic under ties.
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let sigma_max = order[0].0;
    let zero_tol = sigma_max * eps * T::lit(m as f64);
    let mut u_cols: Vec<Vector<T>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vector<T>> = Vec::with_capacity(n);
    let mut svals = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (k, &(s, j)) in order.iter().enumerate() {
        v_cols.push(Vector::new(vcols[j].clone())?);
        if s > zero_tol {
            let inv = T::one() / s;
            u_cols.push(Vector::from_fn(m, |i| cols[j][i] * inv));
            svals.push(s);
        } else {
            u_cols.push(Vector::zeros(m));
            svals.push(T::zero());
            pending.push(k);
        }
    }
    if !pending.is_empty() {
        complete_columns(&mut u_cols, &pending);
    }
    Ok(SvdResult {
        u: Matrix::from_columns(m, &u_cols),
        singular_values: Vector::new(svals)?,
        v: Matrix::from_columns(n, &v_cols),
    })
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to all
/// other columns, drawing candidates from the standard basis.
fn complete_columns<T: Real>(cols: &mut [Vector<T>], pending: &[usize]) {
    let m = cols[0].len();
    let mut candidate = 0usize;
    for &k in pending {
        loop {
            assert!(candidate < m, "basis completion ran out of candidates");
            let mut x = Vector::<T>::basis(m, candidate);
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == k || c.norm_sq() == T::zero() {
                        continue;
                    }
                    let proj = c.dot(&x);
                    x.axpy(-proj, c);
                }
            }
            let nrm = x.norm();
            if nrm > T::lit(0.1) {
                cols[k] = x.scale(T::one() / nrm);
                break;
            }
        }
    }
}
