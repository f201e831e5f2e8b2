// SPDX-License-Identifier: MIT OR Apache-2.0

//! The three-unit linear network that computes the identity function, and
//! the same network with its hidden layer expressed in a rotated basis.
//!
//! In the standard basis `h₁` is disconnected (read weight 0), `h₂` is
//! dormant (always 0 on data) and `h₃` carries the signal. In the rotated
//! basis `d₁` carries the signal, `d₂` is disconnected and `d₃` dormant.

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ToyNet<T> {
    pub w1: Vector<T>,
    pub w2: Vector<T>,
}

impl<T: Real> ToyNet<T> {
    /// `w1 = (1, 0, 1)`, `w2 = (0, 2, 1)`.
    pub fn canonical() -> Self {
        Self {
            w1: Vector::from_f64(&[1.0, 0.0, 1.0]),
            w2: Vector::from_f64(&[0.0, 2.0, 1.0]),
        }
    }

    pub fn hidden(&self, x: T) -> Vector<T> {
        self.w1.scale(x)
    }

    pub fn readout(&self, h: &Vector<T>) -> T {
        self.w2.dot(h)
    }

    pub fn forward(&self, x: T) -> (Vector<T>, T) {
        let h = self.hidden(x);
        let y = self.readout(&h);
        (h, y)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RotatedToyNet<T> {
    pub rotation: Matrix<T>,
    pub base: ToyNet<T>,
}

impl<T: Real> RotatedToyNet<T> {
    /// Rows `d₁ = (e₁+e₂)/√2`, `d₂ = (−e₁+e₂−2e₃)/√6`, `d₃ = (−e₁+e₂+e₃)/√3`.
    pub fn canonical() -> Self {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let s6 = 6f64.sqrt();
        let rotation = Matrix::from_f64_rows(&[
            &[1.0 / s2, 1.0 / s2, 0.0],
            &[-1.0 / s6, 1.0 / s6, -2.0 / s6],
            &[-1.0 / s3, 1.0 / s3, 1.0 / s3],
        ])
        .expect("finite constants");
        Self {
            rotation,
            base: ToyNet::canonical(),
        }
    }

    /// Read weights in the rotated basis, `R w₂`.
    pub fn read_weights(&self) -> Vector<T> {
        self.rotation.matvec(&self.base.w2)
    }

    /// `h' = R w₁ x`
    pub fn hidden(&self, x: T) -> Vector<T> {
        self.rotation.matvec(&self.base.w1).scale(x)
    }

    pub fn readout(&self, h: &Vector<T>) -> T {
        self.read_weights().dot(h)
    }

    pub fn forward(&self, x: T) -> (Vector<T>, T) {
        let h = self.hidden(x);
        let y = self.readout(&h);
        (h, y)
    }

    /// Maps a hidden-space direction of the unrotated net into rotated
    /// coordinates.
    pub fn to_rotated(&self, v: &Vector<T>) -> Vector<T> {
        self.rotation.matvec(v)
    }
}

pub fn toy_forward<T: Real>(net: &ToyNet<T>, x: T) -> (Vector<T>, T) {
    net.forward(x)
}

pub fn rotated_toy_forward<T: Real>(net: &RotatedToyNet<T>, x: T) -> (Vector<T>, T) {
    net.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_toy_values() {
        let net = ToyNet::<f64>::canonical();
        let (h, y) = net.forward(2.0);
        assert_eq!(h.as_slice(), &[2.0, 0.0, 2.0]);
        assert_eq!(y, 2.0);
        let (h, y) = net.forward(0.0);
        assert_eq!(h.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(y, 0.0);
        assert_eq!(net.forward(-1.5).1, -1.5);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = RotatedToyNet::<f64>::canonical();
        assert!(r.rotation.orthonormality_defect() < 1e-12);
        assert!(r.rotation.transpose().orthonormality_defect() < 1e-12);
    }

    #[test]
    fn rotated_hidden_at_one() {
        let net = RotatedToyNet::<f64>::canonical();
        let (h, y) = net.forward(1.0);
        let expected = [1.0 / 2f64.sqrt(), -(1.5f64).sqrt(), 0.0];
        for (a, b) in h.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((y - 1.0).abs() < 1e-15);
        let (h0, y0) = net.forward(0.0);
        assert_eq!(h0.max_abs(), 0.0);
        assert_eq!(y0, 0.0);
        let w = net.read_weights();
        assert!((w[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(w[1].abs() < 1e-15);
        assert!((w[2] - 3f64.sqrt()).abs() < 1e-15);
    }
}
