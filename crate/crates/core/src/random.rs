// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded sampling helpers. Every stochastic routine in the crate draws from a
//! [`LabRng`] created here so runs are reproducible from a single integer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{orthonormalize_columns, Matrix, Vector};
use crate::scalar::Real;

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for sub-task `stream` of run `seed`.
pub fn substream(seed: u64, stream: u64) -> LabRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal<T: Real>(rng: &mut LabRng) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::lit(x)
}

pub fn gaussian_vector<T: Real>(rng: &mut LabRng, dim: usize, std: f64) -> Vector<T> {
    Vector::from_fn(dim, |_| {
        let x: f64 = rng.sample(StandardNormal);
        T::lit(x * std)
    })
}

pub fn gaussian_matrix<T: Real>(rng: &mut LabRng, rows: usize, cols: usize, std: f64) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| {
        let x: f64 = rng.sample(StandardNormal);
        T::lit(x * std)
    })
}

pub fn unit_vector<T: Real>(rng: &mut LabRng, dim: usize) -> Vector<T> {
    loop {
        let v: Vector<T> = gaussian_vector(rng, dim, 1.0);
        if let Ok(u) = v.normalized() {
            return u;
        }
    }
}

/// `dim × k` matrix with orthonormal columns, uniformly distributed.
pub fn orthonormal_columns<T: Real>(rng: &mut LabRng, dim: usize, k: usize) -> Matrix<T> {
    assert!(k <= dim, "cannot draw {k} orthonormal columns in dimension {dim}");
    loop {
        let g = gaussian_matrix(rng, dim, k, 1.0);
        if let Ok(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}

pub fn orthogonal_matrix<T: Real>(rng: &mut LabRng, dim: usize) -> Matrix<T> {
    orthonormal_columns(rng, dim, dim)
}

/// Uniform random ±1 label.
pub fn sign(rng: &mut LabRng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}
