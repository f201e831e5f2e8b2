// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kernel / rowspace machinery for a down-projection `W`.
//!
//! A direction `v` in the input space of `W` splits orthogonally into a part
//! in `ker W` (invisible downstream) and a part in the rowspace of `W`.

use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, Vector};
use super::svd::{svd, SvdResult};
use crate::error::{ensure_dim, Error, Result};
use crate::scalar::Real;

/// Orthogonal split `v = null + row` with `null ∈ ker W`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KernelSplit<T> {
    pub null: Vector<T>,
    pub row: Vector<T>,
}

/// Cached orthonormal bases for the rowspace and kernel of a matrix.
#[derive(Clone, Debug)]
pub struct KernelProjector<T> {
    row_basis: Matrix<T>,
    null_basis: Matrix<T>,
    tol: T,
    rank: usize,
}

impl<T: Real> KernelProjector<T> {
    /// Uses the default rank tolerance `σ_max · max(m, n) · 1e-12`.
    pub fn new(w: &Matrix<T>) -> Result<Self> {
        let s = svd(w)?;
        let tol = s.default_tolerance();
        Ok(Self::from_svd(&s, w.cols(), tol))
    }

    pub fn with_tolerance(w: &Matrix<T>, rank_tol: T) -> Result<Self> {
        if rank_tol < T::zero() || !rank_tol.is_finite() {
            return Err(Error::InvalidArgument("rank_tol must be finite and >= 0".into()));
        }
        let s = svd(w)?;
        Ok(Self::from_svd(&s, w.cols(), rank_tol))
    }

    fn from_svd(s: &SvdResult<T>, n: usize, tol: T) -> Self {
        let rank = s.rank(tol);
        let row_basis = s.v.leading_columns(rank);
        let null_basis = complement_basis(&row_basis, n);
        Self {
            row_basis,
            null_basis,
            tol,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tolerance(&self) -> T {
        self.tol
    }

    pub fn input_dim(&self) -> usize {
        self.row_basis.rows()
    }

    pub fn row_basis(&self) -> &Matrix<T> {
        &self.row_basis
    }

    pub fn null_basis(&self) -> &Matrix<T> {
        &self.null_basis
    }

    /// Orthogonal projection onto the rowspace.
    pub fn project_row(&self, v: &Vector<T>) -> Vector<T> {
        let coeffs = self.row_basis.tr_matvec(v);
        self.row_basis.matvec(&coeffs)
    }

    /// Orthogonal projection onto the kernel.
    pub fn project_null(&self, v: &Vector<T>) -> Vector<T> {
        v.sub(&self.project_row(v))
    }

    pub fn split(&self, v: &Vector<T>) -> Result<KernelSplit<T>> {
        ensure_dim("kernel split", self.input_dim(), v.len())?;
        let row = self.project_row(v);
        let null = v.sub(&row);
        Ok(KernelSplit { null, row })
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (orthonormal columns) in `R^n`, by pivoted Gram–Schmidt on the
/// columns of `I − B Bᵀ`.
fn complement_basis<T: Real>(basis: &Matrix<T>, n: usize) -> Matrix<T> {
    let k = basis.cols();
    let want = n - k;
    let mut found: Vec<Vector<T>> = Vec::with_capacity(want);
    let mut candidates: Vec<Vector<T>> = (0..n)
        .map(|i| {
            let e = Vector::<T>::basis(n, i);
            let c = basis.tr_matvec(&e);
            e.sub(&basis.matvec(&c))
        })
        .collect();
    while found.len() < want {
        let (best, _) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm_sq()))
            .fold((0, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut x = candidates[best].clone();
        // reorthogonalize against the fixed basis and what we have so far
        for _ in 0..2 {
            let c = basis.tr_matvec(&x);
            x = x.sub(&basis.matvec(&c));
            for f in &found {
                let p = f.dot(&x);
                x.axpy(-p, f);
            }
        }
        let q = x.scale(T::one() / x.norm());
        for c in candidates.iter_mut() {
            let p = q.dot(c);
            c.axpy(-p, &q);
        }
        found.push(q);
    }
    Matrix::from_columns(n, &found)
}

/// Orthonormal columns spanning `ker W`; zero columns for full column rank.
pub fn nullspace_basis<T: Real>(w: &Matrix<T>, rank_tol: Option<T>) -> Result<Matrix<T>> {
    let p = match rank_tol {
        Some(t) => KernelProjector::with_tolerance(w, t)?,
        None => KernelProjector::new(w)?,
    };
    Ok(p.null_basis)
}

/// Orthonormal columns spanning the rowspace of `W`.
pub fn rowspace_basis<T: Real>(w: &Matrix<T>, rank_tol: Option<T>) -> Result<Matrix<T>> {
    let p = match rank_tol {
        Some(t) => KernelProjector::with_tolerance(w, t)?,
        None => KernelProjector::new(w)?,
    };
    Ok(p.row_basis)
}

pub fn numerical_rank<T: Real>(w: &Matrix<T>, rank_tol: Option<T>) -> Result<usize> {
    let s = svd(w)?;
    let tol = rank_tol.unwrap_or_else(|| s.default_tolerance());
    Ok(s.rank(tol))
}

/// Moore–Penrose pseudoinverse, truncating singular values at or below the
/// rank tolerance.
pub fn pseudoinverse<T: Real>(w: &Matrix<T>, rank_tol: Option<T>) -> Result<Matrix<T>> {
    let s = svd(w)?;
    let tol = rank_tol.unwrap_or_else(|| s.default_tolerance());
    let r = s.rank(tol);
    let (m, n) = w.shape();
    let mut out = Matrix::zeros(n, m);
    for k in 0..r {
        let inv = T::one() / s.singular_values[k];
        for i in 0..n {
            let vik = s.v[(i, k)] * inv;
            if vik == T::zero() {
                continue;
            }
            for j in 0..m {
                out[(i, j)] = out[(i, j)] + vik * s.u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Splits `v` into its `ker W` and rowspace components.
pub fn decompose_against_kernel<T: Real>(v: &Vector<T>, w: &Matrix<T>) -> Result<KernelSplit<T>> {
    ensure_dim("decompose_against_kernel", w.cols(), v.len())?;
    KernelProjector::new(w)?.split(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, gaussian_vector, orthogonal_matrix, rng};

    #[test]
    fn canonical_kernel() {
        let w = Matrix::<f64>::from_f64_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        let n = nullspace_basis(&w, None).unwrap();
        assert_eq!(n.shape(), (3, 1));
        let col = n.column(0);
        let e3 = Vector::from_f64(&[0.0, 0.0, 1.0]);
        let dist = col.sub(&e3).norm().min(col.add(&e3).norm());
        assert!(dist < 1e-12);
    }

    #[test]
    fn invertible_has_trivial_kernel() {
        let mut g = rng(1);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 4, 1.0);
        assert_eq!(nullspace_basis(&w, None).unwrap().cols(), 0);
    }

    #[test]
    fn known_kernel_is_recovered() {
        // W = A · Pᵀ-restricted: rows of W span the first two columns of Q,
        // so the kernel is spanned by the last two.
        let mut g = rng(2);
        let q: Matrix<f64> = orthogonal_matrix(&mut g, 4);
        let a: Matrix<f64> = gaussian_matrix(&mut g, 4, 2, 1.0);
        let range = q.leading_columns(2);
        let w = a.matmul(&range.transpose());
        let k = Matrix::from_fn(4, 2, |i, j| q[(i, j + 2)]);
        let n = nullspace_basis(&w, None).unwrap();
        let pn = n.matmul(&n.transpose());
        let pk = k.matmul(&k.transpose());
        assert!(pn.sub(&pk).frobenius_norm() < 1e-8);
    }

    #[test]
    fn pseudoinverse_of_diagonal() {
        let w = Matrix::<f64>::diag(&[2.0, 4.0]);
        let p = pseudoinverse(&w, None).unwrap();
        assert!(p.sub(&Matrix::diag(&[0.5, 0.25])).max_abs() < 1e-15);
        let i = Matrix::<f64>::identity(3);
        assert!(pseudoinverse(&i, None).unwrap().sub(&i).max_abs() < 1e-15);
    }

    #[test]
    fn pseudoinverse_right_inverse_for_wide() {
        let mut g = rng(3);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 3, 8, 1.0);
        let v: Vector<f64> = gaussian_vector(&mut g, 3, 1.0);
        let u = pseudoinverse(&w, None).unwrap().matvec(&v);
        assert!(w.matvec(&u).sub(&v).norm() < 1e-9);
    }

    #[test]
    fn decomposition_edge_cases() {
        let mut g = rng(4);
        let w: Matrix<f64> = gaussian_matrix(&mut g, 4, 10, 1.0);
        let p = KernelProjector::new(&w).unwrap();
        let inside = p.null_basis().column(3);
        let s = p.split(&inside).unwrap();
        assert!(s.row.norm() < 1e-12);
        let y: Vector<f64> = gaussian_vector(&mut g, 4, 1.0);
        let rowv = w.tr_matvec(&y);
        let s = p.split(&rowv).unwrap();
        assert!(s.null.norm() < 1e-12 * rowv.norm());
        assert!(decompose_against_kernel(&Vector::zeros(9), &w).is_err());
    }
}
