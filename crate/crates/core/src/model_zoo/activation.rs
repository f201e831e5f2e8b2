// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::linalg::Vector;
use crate::scalar::Real;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

/// Standard normal density.
#[inline]
pub fn normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    inv_sqrt_2pi * (-(x * x) * T::lit(0.5)).exp()
}

/// Exact GELU, `x · Φ(x)`.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    x * normal_cdf(x)
}

/// `d/dx gelu(x) = Φ(x) + x φ(x)`.
#[inline]
pub fn gelu_derivative<T: Real>(x: T) -> T {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu_vec<T: Real>(v: &Vector<T>) -> Vector<T> {
    v.map(gelu)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson integration of the normal density, independent of erf.
    fn phi_by_quadrature(x: f64) -> f64 {
        let lo = -12.0;
        let n = 20_000;
        let h = (x - lo) / n as f64;
        let f = |t: f64| (-(t * t) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(lo) + f(x);
        for i in 1..n {
            let t = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        s * h / 3.0
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(10.0f64) - 10.0).abs() < 1e-6);
        let oracle = phi_by_quadrature(1.0);
        assert!((gelu(1.0f64) - oracle).abs() < 1e-12);
        assert!((gelu(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }

    #[test]
    fn gelu_lower_bound() {
        let mut x = -10.0f64;
        while x < 10.0 {
            assert!(gelu(x) >= -0.17, "gelu({x}) = {}", gelu(x));
            x += 0.001;
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        assert!((gelu_derivative(0.0f64) - 0.5).abs() < 1e-15);
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-5;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_derivative(x)).abs() < 1e-9);
        }
    }
}
