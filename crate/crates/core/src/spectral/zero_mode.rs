use num_complex::Complex64;
use std::f64::consts::PI;

use super::fft::{plan, Direction};
use super::{mode_index, Representation, SpectralField3, TorusGeometry};
use crate::error::{Error, Result};

/// A function of `y` alone, held as its Fourier coefficients on the `y` grid.
///
/// Norms are one-dimensional: `l2() = (int_0^L3 |g|^2 dy)^(1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroMode {
    length: f64,
    coeffs: Vec<Complex64>,
}

impl ZeroMode {
    pub fn from_coefficients(length: f64, coeffs: Vec<Complex64>) -> Self {
        Self { length, coeffs }
    }

    pub fn from_values(length: f64, values: &[f64]) -> Self {
        let mut c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan(c.len(), Direction::Forward).process(&mut c);
        let scale = 1.0 / c.len() as f64;
        c.iter_mut().for_each(|v| *v *= scale);
        Self { length, coeffs: c }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Samples on the `y` grid (real parts).
    pub fn values(&self) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        plan(c.len(), Direction::Inverse).process(&mut c);
        c.iter().map(|v| v.re).collect()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn l2(&self) -> f64 {
        (self.length * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = Complex64::default();
        out
    }

    pub fn deriv(&self, order: u32) -> Self {
        let n = self.coeffs.len();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if order % 2 == 1 && i == n / 2 {
                    return Complex64::default();
                }
                let k = 2.0 * PI * mode_index(i, n) as f64 / self.length;
                c * Complex64::new(0.0, k).powu(order)
            })
            .collect();
        Self { length: self.length, coeffs }
    }

    /// Pointwise product of two profiles, truncated by the 2/3 rule.
    pub fn product_dealiased(&self, other: &Self) -> Self {
        let a = self.values();
        let b = other.values();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut out = Self::from_values(self.length, &p);
        let n = out.coeffs.len();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if mode_index(i, n).unsigned_abs() as usize > n / 3 {
                *c = Complex64::default();
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            length: self.length,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        Self {
            length: self.length,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { length: self.length, coeffs: self.coeffs.iter().map(|a| a * alpha).collect() }
    }

    /// Extends the profile to a field on the torus that is constant in `x1, x2`.
    pub fn to_field(&self, geometry: TorusGeometry) -> Result<SpectralField3> {
        let mut f = SpectralField3::zeros(geometry, Representation::Spectral);
        let n3 = geometry.sizes[2];
        if n3 != self.coeffs.len() {
            return Err(Error::GeometryMismatch(format!(
                "profile has {} points, grid has N3 = {n3}",
                self.coeffs.len()
            )));
        }
        f.data_mut()[..n3].copy_from_slice(&self.coeffs);
        Ok(f)
    }
}
