//! Periodic grids, scalar fields on the torus and their Fourier
//! representation.
//!
//! Spectral coefficients are stored with function-space normalization: the
//! `(0,0,0)` coefficient is the mean of the physical samples and a single
//! harmonic `sin(k·x)` has two coefficients of modulus 1/2. Data is laid out
//! row-major as `[i1][i2][i3]`, so each `(n1, n2)` column along `y` is
//! contiguous.

pub(crate) mod fft;
mod field;
mod zero_mode;

pub use field::{Norms, Representation, SpectralField3};
pub use zero_mode::ZeroMode;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Signed mode number of array index `i` on an axis of `n` points, in `[-n/2, n/2)`.
#[inline]
pub fn mode_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Array index of the mode `-n`, i.e. the Hermitian partner of index `i`.
#[inline]
pub(crate) fn partner_index(i: usize, n: usize) -> usize {
    (n - i) % n
}

/// One of the three coordinate axes; `X1`, `X2` are horizontal, `Y` is the
/// direction in which the helical flow rotates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X1,
    X2,
    Y,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::Y];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
            Axis::Y => 2,
        }
    }

    /// Parses the 1-based axis number used on the command line.
    pub fn from_number(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            3 => Ok(Axis::Y),
            _ => Err(Error::Contract(format!("axis must be 1, 2 or 3, got {n}"))),
        }
    }
}

/// The periodic box `[0,L1] x [0,L2] x [0,L3]` with an even grid per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub lengths: [f64; 3],
    pub sizes: [usize; 3],
}

impl TorusGeometry {
    pub fn new(lengths: [f64; 3], sizes: [usize; 3]) -> Result<Self> {
        for (a, (&l, &n)) in lengths.iter().zip(&sizes).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGeometry(format!("L{} = {l} must be positive", a + 1)));
            }
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGeometry(format!(
                    "N{} = {n} must be even and at least 4",
                    a + 1
                )));
            }
        }
        Ok(Self { lengths, sizes })
    }

    /// Cube of side `length` with `n` points per axis.
    pub fn cube(length: f64, n: usize) -> Result<Self> {
        Self::new([length; 3], [n; 3])
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        self.lengths[axis.index()] / self.sizes[axis.index()] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        Axis::ALL.iter().map(|&a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Grid coordinate of point `i` on `axis`.
    pub fn coordinate(&self, axis: Axis, i: usize) -> f64 {
        i as f64 * self.spacing(axis)
    }

    /// Physical wavenumber `2 pi n / L` of array index `i` on `axis`.
    pub fn wavenumber(&self, axis: Axis, i: usize) -> f64 {
        let a = axis.index();
        2.0 * PI * mode_index(i, self.sizes[a]) as f64 / self.lengths[a]
    }

    /// Wavenumber tables for all three axes.
    pub fn wavenumbers(&self) -> [Vec<f64>; 3] {
        Axis::ALL.map(|a| (0..self.sizes[a.index()]).map(|i| self.wavenumber(a, i)).collect())
    }

    /// Largest retained mode per axis under the 2/3 rule.
    pub fn dealias_band(&self) -> [usize; 3] {
        self.sizes.map(|n| n / 3)
    }

    #[inline]
    pub fn flat_index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.sizes[1] + i2) * self.sizes[2] + i3
    }

    pub fn same_as(&self, other: &TorusGeometry) -> bool {
        self.sizes == other.sizes
            && self
                .lengths
                .iter()
                .zip(&other.lengths)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()))
    }

    pub fn ensure_same(&self, other: &TorusGeometry) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A horizontal Fourier mode `(n1, n2)` with physical wave vector
/// `k = (2 pi n1 / L1, 2 pi n2 / L2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePair {
    pub n1: i64,
    pub n2: i64,
}

impl ModePair {
    pub fn new(n1: i64, n2: i64) -> Self {
        Self { n1, n2 }
    }

    pub fn is_zero(&self) -> bool {
        self.n1 == 0 && self.n2 == 0
    }

    pub fn wavevector(&self, l1: f64, l2: f64) -> (f64, f64) {
        (2.0 * PI * self.n1 as f64 / l1, 2.0 * PI * self.n2 as f64 / l2)
    }
}
