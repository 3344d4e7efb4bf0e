use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft;
use super::{mode_index, partner_index, Axis, TorusGeometry, ZeroMode};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Physical,
    Spectral,
}

/// Discrete norms of a field, all volume weighted so that `||1||_2^2 = L1 L2 L3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    /// `||grad f||_2`
    pub h1dot: f64,
    /// `||Laplacian f||_2`
    pub h2dot: f64,
}

/// A scalar field on the torus held either as grid samples or as Fourier
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField3 {
    geometry: TorusGeometry,
    repr: Representation,
    data: Vec<Complex64>,
}

impl SpectralField3 {
    pub fn zeros(geometry: TorusGeometry, repr: Representation) -> Self {
        Self { geometry, repr, data: vec![Complex64::default(); geometry.len()] }
    }

    pub fn from_parts(geometry: TorusGeometry, repr: Representation, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Contract(format!(
                "data length {} does not match grid size {}",
                data.len(),
                geometry.len()
            )));
        }
        Ok(Self { geometry, repr, data })
    }

    /// Samples `f(x1, x2, y)` on the grid.
    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(geometry: TorusGeometry, f: F) -> Self {
        let [n1, n2, n3] = geometry.sizes;
        let mut data = Vec::with_capacity(geometry.len());
        for i1 in 0..n1 {
            let x1 = geometry.coordinate(Axis::X1, i1);
            for i2 in 0..n2 {
                let x2 = geometry.coordinate(Axis::X2, i2);
                for i3 in 0..n3 {
                    let y = geometry.coordinate(Axis::Y, i3);
                    data.push(Complex64::new(f(x1, x2, y), 0.0));
                }
            }
        }
        Self { geometry, repr: Representation::Physical, data }
    }

    pub fn from_real(geometry: TorusGeometry, values: &[f64]) -> Result<Self> {
        Self::from_parts(
            geometry,
            Representation::Physical,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn constant(geometry: TorusGeometry, value: f64) -> Self {
        let mut f = Self::zeros(geometry, Representation::Spectral);
        f.data[0] = Complex64::new(value, 0.0);
        f
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn is_spectral(&self) -> bool {
        self.repr == Representation::Spectral
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Forward transform; the input must be physical.
    pub fn to_spectral(&self) -> Result<Self> {
        if self.repr != Representation::Physical {
            return Err(Error::Contract("to_spectral expects a physical field".into()));
        }
        let mut out = self.clone();
        fft::forward3(&mut out.data, self.geometry.sizes);
        out.repr = Representation::Spectral;
        Ok(out)
    }

    /// Inverse transform; the input must be spectral.
    pub fn to_physical(&self) -> Result<Self> {
        if self.repr != Representation::Spectral {
            return Err(Error::Contract("to_physical expects a spectral field".into()));
        }
        let mut out = self.clone();
        fft::inverse3(&mut out.data, self.geometry.sizes);
        out.repr = Representation::Physical;
        Ok(out)
    }

    /// Converts in place if needed.
    pub fn into_spectral(mut self) -> Self {
        if self.repr == Representation::Physical {
            fft::forward3(&mut self.data, self.geometry.sizes);
            self.repr = Representation::Spectral;
        }
        self
    }

    pub fn into_physical(mut self) -> Self {
        if self.repr == Representation::Spectral {
            fft::inverse3(&mut self.data, self.geometry.sizes);
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn spectral(&self) -> Self {
        self.clone().into_spectral()
    }

    pub fn physical(&self) -> Self {
        self.clone().into_physical()
    }

    /// Real parts of the grid samples.
    pub fn real_values(&self) -> Vec<f64> {
        match self.repr {
            Representation::Physical => self.data.iter().map(|c| c.re).collect(),
            Representation::Spectral => self.physical().data.iter().map(|c| c.re).collect(),
        }
    }

    /// Largest `|Im f|` relative to `max |f|` over the grid.
    pub fn imaginary_residue(&self) -> f64 {
        let phys = if self.is_spectral() { self.physical() } else { self.clone() };
        let max_abs = phys.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            return 0.0;
        }
        phys.data.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / max_abs
    }

    fn index_of_mode(&self, n: [i64; 3]) -> usize {
        let s = self.geometry.sizes;
        let idx = |m: i64, len: usize| m.rem_euclid(len as i64) as usize;
        self.geometry.flat_index(idx(n[0], s[0]), idx(n[1], s[1]), idx(n[2], s[2]))
    }

    /// Coefficient of the signed mode `(n1, n2, n3)`; the field must be spectral.
    pub fn coeff(&self, n: [i64; 3]) -> Complex64 {
        debug_assert!(self.is_spectral());
        self.data[self.index_of_mode(n)]
    }

    pub fn set_coeff(&mut self, n: [i64; 3], value: Complex64) {
        let i = self.index_of_mode(n);
        self.data[i] = value;
    }

    /// Applies `f(k1, k2, k3, coefficient)` to every spectral coefficient.
    pub(crate) fn map_modes<F>(&mut self, f: F)
    where
        F: Fn(f64, f64, f64, Complex64) -> Complex64 + Sync,
    {
        debug_assert!(self.is_spectral());
        let [kx1, kx2, ky] = self.geometry.wavenumbers();
        let n2 = self.geometry.sizes[1];
        let n3 = self.geometry.sizes[2];
        self.data.par_chunks_mut(n3).enumerate().for_each(|(col, line)| {
            let (i1, i2) = (col / n2, col % n2);
            for (i3, c) in line.iter_mut().enumerate() {
                *c = f(kx1[i1], kx2[i2], ky[i3], *c);
            }
        });
    }

    /// Spectral derivative of the given order along `axis`. Odd orders drop
    /// the Nyquist mode so that real fields stay real.
    pub fn deriv(&self, axis: Axis, order: u32) -> Result<Self> {
        if order < 1 {
            return Err(Error::Contract("derivative order must be at least 1".into()));
        }
        let mut out = self.spectral();
        let a = axis.index();
        let n = self.geometry.sizes[a];
        let k = &self.geometry.wavenumbers()[a];
        let factors: Vec<Complex64> = (0..n)
            .map(|i| {
                if order % 2 == 1 && i == n / 2 {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, k[i]).powu(order)
                }
            })
            .collect();
        let [_, n2, n3] = self.geometry.sizes;
        out.data.par_chunks_mut(n3).enumerate().for_each(|(col, line)| {
            let (i1, i2) = (col / n2, col % n2);
            for (i3, c) in line.iter_mut().enumerate() {
                let i = [i1, i2, i3][a];
                *c *= factors[i];
            }
        });
        Ok(out)
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.spectral();
        out.map_modes(|k1, k2, k3, c| -c * (k1 * k1 + k2 * k2 + k3 * k3));
        out
    }

    /// Zero-mean solution `c` of `-Laplacian c = f` for a mean-free `f`.
    pub fn invert_neg_laplacian(&self) -> Result<Self> {
        let mut out = self.spectral();
        let l2 = out.l2();
        let mean = out.data[0].norm();
        if mean * self.geometry.volume().sqrt() > 1e-12 * l2 {
            return Err(Error::PoissonNotMeanFree { mean, l2 });
        }
        out.map_modes(|k1, k2, k3, c| {
            let k2sum = k1 * k1 + k2 * k2 + k3 * k3;
            if k2sum == 0.0 {
                Complex64::default()
            } else {
                c / k2sum
            }
        });
        Ok(out)
    }

    pub fn mean(&self) -> f64 {
        match self.repr {
            Representation::Spectral => self.data[0].re,
            Representation::Physical => {
                self.data.iter().map(|c| c.re).sum::<f64>() / self.data.len() as f64
            }
        }
    }

    /// The horizontal average `<f>(y)`.
    pub fn mean_over_x(&self) -> ZeroMode {
        let s = self.spectral();
        let n3 = self.geometry.sizes[2];
        ZeroMode::from_coefficients(self.geometry.lengths[2], s.data[..n3].to_vec())
    }

    /// The part of `f` orthogonal to functions of `y` alone, `f - <f>`.
    pub fn fluct(&self) -> Self {
        let mut out = self.spectral();
        let n3 = self.geometry.sizes[2];
        out.data[..n3].iter_mut().for_each(|c| *c = Complex64::default());
        out
    }

    /// Zeroes every coefficient with `|n_a| > N_a / 3` on some axis.
    pub fn dealias(&mut self) {
        debug_assert!(self.is_spectral());
        let band = self.geometry.dealias_band();
        let sizes = self.geometry.sizes;
        let keep = |i: usize, a: usize| mode_index(i, sizes[a]).unsigned_abs() as usize <= band[a];
        let [_, n2, n3] = sizes;
        self.data.par_chunks_mut(n3).enumerate().for_each(|(col, line)| {
            let (i1, i2) = (col / n2, col % n2);
            let col_kept = keep(i1, 0) && keep(i2, 1);
            for (i3, c) in line.iter_mut().enumerate() {
                if !(col_kept && keep(i3, 2)) {
                    *c = Complex64::default();
                }
            }
        });
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.spectral();
        out.dealias();
        out
    }

    /// Projects onto Hermitian-symmetric coefficients (real fields).
    pub fn symmetrize(&mut self) {
        self.symmetrize_columns(None);
    }

    /// `symmetrize` restricted to the given `(n1, n2)` columns (flat indices
    /// `i1 * N2 + i2`). The list must be closed under `(n1, n2) -> (-n1, -n2)`.
    pub fn symmetrize_columns(&mut self, columns: Option<&[usize]>) {
        debug_assert!(self.is_spectral());
        let [n1, n2, n3] = self.geometry.sizes;
        let mut pair = |col: usize| {
            let (i1, i2) = (col / n2, col % n2);
            let p = partner_index(i1, n1) * n2 + partner_index(i2, n2);
            if p < col {
                return;
            }
            for i3 in 0..n3 {
                let a = col * n3 + i3;
                let b = p * n3 + partner_index(i3, n3);
                let v = 0.5 * (self.data[a] + self.data[b].conj());
                self.data[a] = v;
                self.data[b] = v.conj();
            }
        };
        match columns {
            Some(cols) => cols.iter().for_each(|&c| pair(c)),
            None => (0..n1 * n2).for_each(pair),
        }
    }

    /// `max |f(n) - conj f(-n)| / max |f(n)|` over all spectral coefficients.
    pub fn hermitian_defect(&self) -> f64 {
        let s = self.spectral();
        let [n1, n2, n3] = self.geometry.sizes;
        let max_abs = s.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n3 {
                    let a = s.data[self.geometry.flat_index(i1, i2, i3)];
                    let b = s.data[self.geometry.flat_index(
                        partner_index(i1, n1),
                        partner_index(i2, n2),
                        partner_index(i3, n3),
                    )];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst / max_abs
    }

    /// `sum over coefficients of w(k) |f_k|^2`, times the box volume.
    fn weighted_energy<F: Fn(f64, f64, f64) -> f64>(&self, w: F) -> f64 {
        let s = self.spectral();
        let [kx1, kx2, ky] = self.geometry.wavenumbers();
        let [_, n2, n3] = self.geometry.sizes;
        let mut total = 0.0;
        for (col, line) in s.data.chunks(n3).enumerate() {
            let (i1, i2) = (col / n2, col % n2);
            for (i3, c) in line.iter().enumerate() {
                total += w(kx1[i1], kx2[i2], ky[i3]) * c.norm_sqr();
            }
        }
        total * self.geometry.volume()
    }

    pub fn l2(&self) -> f64 {
        match self.repr {
            Representation::Spectral => self.weighted_energy(|_, _, _| 1.0).sqrt(),
            Representation::Physical => {
                (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.geometry.cell_volume()).sqrt()
            }
        }
    }

    pub fn linf(&self) -> f64 {
        let phys = if self.is_spectral() { self.physical() } else { self.clone() };
        phys.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn h1dot(&self) -> f64 {
        self.weighted_energy(|a, b, c| a * a + b * b + c * c).sqrt()
    }

    pub fn h2dot(&self) -> f64 {
        self.weighted_energy(|a, b, c| {
            let k2 = a * a + b * b + c * c;
            k2 * k2
        })
        .sqrt()
    }

    pub fn norms(&self) -> Norms {
        Norms { l2: self.l2(), linf: self.linf(), h1dot: self.h1dot(), h2dot: self.h2dot() }
    }

    /// Real part of the volume-weighted inner product `<self, other>`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.geometry.ensure_same(&other.geometry)?;
        let a = self.spectral();
        let b = other.spectral();
        let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x * y.conj()).re).sum();
        Ok(sum * self.geometry.volume())
    }

    /// `self += alpha * other`, in the representation of `self`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.geometry.ensure_same(&other.geometry)?;
        if self.repr != other.repr {
            return Err(Error::Contract("axpy operands have different representations".into()));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|a| *a *= alpha);
    }

    /// Maximum coefficient modulus, or `None` if a coefficient is not finite.
    pub fn max_abs_finite(&self) -> Option<f64> {
        let mut m = 0.0f64;
        for c in &self.data {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return None;
            }
            m = m.max(c.norm());
        }
        Some(m)
    }
}
