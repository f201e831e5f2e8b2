// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::activation::gelu_vec;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::random::{gaussian_matrix, gaussian_vector, rng, substream};
use crate::scalar::Real;

/// Number of standard-normal residual inputs used to calibrate the output
/// norm of a random MLP.
pub const CALIBRATION_SAMPLES: usize = 256;

/// Standard deviation of the random biases, before output rescaling.
pub const BIAS_STD: f64 = 0.1;

/// One MLP block: `W_out · gelu(W_in · x + b_in) + b_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MlpLayer<T> {
    #[serde(rename = "W_in")]
    pub w_in: Matrix<T>,
    pub b_in: Vector<T>,
    #[serde(rename = "W_out")]
    pub w_out: Matrix<T>,
    pub b_out: Vector<T>,
}

impl<T: Real> MlpLayer<T> {
    pub fn new(w_in: Matrix<T>, b_in: Vector<T>, w_out: Matrix<T>, b_out: Vector<T>) -> Result<Self> {
        let layer = Self { w_in, b_in, w_out, b_out };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d) = self.w_in.shape();
        ensure_dim("b_in", m, self.b_in.len())?;
        ensure_dim("W_out rows", d, self.w_out.rows())?;
        ensure_dim("W_out cols", m, self.w_out.cols())?;
        ensure_dim("b_out", d, self.b_out.len())?;
        Ok(())
    }

    pub fn d_resid(&self) -> usize {
        self.w_in.cols()
    }

    pub fn d_mlp(&self) -> usize {
        self.w_in.rows()
    }

    pub fn pre_activation(&self, x: &Vector<T>) -> Vector<T> {
        self.w_in.matvec(x).add(&self.b_in)
    }

    pub fn post_activation(&self, x: &Vector<T>) -> Vector<T> {
        gelu_vec(&self.pre_activation(x))
    }

    /// Down-projection applied to a hidden activation.
    pub fn project_out(&self, hidden: &Vector<T>) -> Vector<T> {
        self.w_out.matvec(hidden).add(&self.b_out)
    }

    pub fn forward(&self, x: &Vector<T>) -> Vector<T> {
        self.project_out(&self.post_activation(x))
    }

    /// Mean ℓ₂ norm of the layer output over the rows of `inputs`.
    pub fn mean_output_norm(&self, inputs: &[Vector<T>]) -> T {
        let n = T::from_usize(inputs.len().max(1)).unwrap();
        inputs.iter().map(|x| self.forward(x).norm()).sum::<T>() / n
    }
}

/// Samples `n` standard-normal residual inputs.
pub fn standard_normal_inputs<T: Real>(seed: u64, stream: u64, n: usize, d: usize) -> Vec<Vector<T>> {
    let mut g = substream(seed, stream);
    (0..n).map(|_| gaussian_vector(&mut g, d, 1.0)).collect()
}

/// Random MLP with Gaussian weights (scale `1/√fan_in`), Gaussian biases,
/// and the down-projection rescaled so the mean output norm over
/// [`CALIBRATION_SAMPLES`] standard-normal inputs equals
/// `target_output_norm`.
pub fn make_random_mlp<T: Real>(
    seed: u64,
    d_resid: usize,
    d_mlp: usize,
    target_output_norm: f64,
) -> Result<MlpLayer<T>> {
    if d_resid == 0 || d_mlp <= d_resid {
        return Err(Error::InvalidArgument(format!(
            "random MLP needs 0 < d_resid < d_mlp, got d_resid={d_resid}, d_mlp={d_mlp}"
        )));
    }
    if !(target_output_norm > 0.0 && target_output_norm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target_output_norm must be positive, got {target_output_norm}"
        )));
    }
    let mut g = rng(seed);
    let w_in = gaussian_matrix(&mut g, d_mlp, d_resid, 1.0 / (d_resid as f64).sqrt());
    let b_in = gaussian_vector(&mut g, d_mlp, BIAS_STD);
    let w_out = gaussian_matrix(&mut g, d_resid, d_mlp, 1.0 / (d_mlp as f64).sqrt());
    let b_out = gaussian_vector(&mut g, d_resid, BIAS_STD);
    let mut layer = MlpLayer { w_in, b_in, w_out, b_out };

    let inputs = standard_normal_inputs::<T>(seed, 0x6361_6c69, CALIBRATION_SAMPLES, d_resid);
    let measured = layer.mean_output_norm(&inputs);
    if !(measured > T::zero()) {
        return Err(Error::Degenerate("random MLP produced zero output".into()));
    }
    let s = T::lit(target_output_norm) / measured;
    layer.w_out = layer.w_out.scale(s);
    layer.b_out = layer.b_out.scale(s);
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, svd};

    #[test]
    fn same_seed_is_bit_identical() {
        let a: MlpLayer<f64> = make_random_mlp(7, 8, 32, 1.0).unwrap();
        let b: MlpLayer<f64> = make_random_mlp(7, 8, 32, 1.0).unwrap();
        assert_eq!(a, b);
        let c: MlpLayer<f64> = make_random_mlp(8, 8, 32, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_norm_matches_target_on_fresh_inputs() {
        let layer: MlpLayer<f64> = make_random_mlp(3, 16, 64, 1.0).unwrap();
        let fresh = standard_normal_inputs::<f64>(99, 1, 256, 16);
        let m = layer.mean_output_norm(&fresh);
        assert!((0.95..=1.05).contains(&m), "mean output norm {m}");
    }

    #[test]
    fn down_projection_has_full_rank() {
        let layer: MlpLayer<f64> = make_random_mlp(11, 16, 64, 1.0).unwrap();
        assert_eq!(numerical_rank(&layer.w_out, None).unwrap(), 16);
        let s = svd(&layer.w_out).unwrap();
        let sv = s.singular_values.as_slice();
        assert!(sv[15] > 1e-8 * sv[0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(make_random_mlp::<f64>(0, 8, 8, 1.0).is_err());
        assert!(make_random_mlp::<f64>(0, 8, 16, 0.0).is_err());
    }

    #[test]
    fn json_uses_weight_names() {
        let layer: MlpLayer<f64> = make_random_mlp(1, 2, 4, 1.0).unwrap();
        let s = serde_json::to_string(&layer).unwrap();
        assert!(s.contains("\"W_in\"") && s.contains("\"W_out\"") && s.contains("\"b_in\""));
        let back: MlpLayer<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, layer);
    }
}
