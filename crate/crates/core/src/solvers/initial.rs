use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{mode_index, Axis, Representation, SpectralField3, TorusGeometry};

/// Initial condition classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude * sin(2 pi (n1 x1/L1 + n2 x2/L2 + n3 y/L3))`.
    SingleMode { n: [i64; 3], amplitude: f64 },
    /// Mean-free random field on the modes with `|n_a| <= band`, scaled to
    /// `||f||_2 = amplitude`. Without a seed the problem seed is used.
    RandomBandlimited {
        band: usize,
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Periodized Gaussian of total integral `mass` (27 images).
    GaussianBump { center: [f64; 3], width: f64, mass: f64 },
    Constant { value: f64 },
}

impl InitialData {
    pub fn build(&self, geometry: TorusGeometry, default_seed: u64) -> Result<SpectralField3> {
        match *self {
            InitialData::SingleMode { n, amplitude } => Ok(single_mode(geometry, n, amplitude)),
            InitialData::RandomBandlimited { band, amplitude, seed } => {
                random_bandlimited(geometry, band, amplitude, seed.unwrap_or(default_seed))
            }
            InitialData::GaussianBump { center, width, mass } => gaussian_bump(geometry, center, width, mass),
            InitialData::Constant { value } => Ok(SpectralField3::constant(geometry, value)),
        }
    }
}

pub fn single_mode(geometry: TorusGeometry, n: [i64; 3], amplitude: f64) -> SpectralField3 {
    let resolved = n.iter().zip(geometry.sizes).all(|(&m, size)| m.unsigned_abs() < size as u64 / 2);
    if resolved && n != [0, 0, 0] {
        // sin(k.x) = (e^{ik.x} - e^{-ik.x}) / 2i, set exactly.
        let mut f = SpectralField3::zeros(geometry, Representation::Spectral);
        f.set_coeff(n, Complex64::new(0.0, -0.5 * amplitude));
        f.set_coeff(n.map(|m| -m), Complex64::new(0.0, 0.5 * amplitude));
        return f;
    }
    let [l1, l2, l3] = geometry.lengths;
    let k = [2.0 * PI * n[0] as f64 / l1, 2.0 * PI * n[1] as f64 / l2, 2.0 * PI * n[2] as f64 / l3];
    SpectralField3::from_fn(geometry, |x, z, y| amplitude * (k[0] * x + k[1] * z + k[2] * y).sin()).into_spectral()
}

pub fn random_bandlimited(geometry: TorusGeometry, band: usize, amplitude: f64, seed: u64) -> Result<SpectralField3> {
    let half = geometry.sizes.map(|n| n / 2 - 1);
    if band == 0 || half.iter().any(|&h| band > h) {
        return Err(Error::InvalidInput(format!("band {band} must be in 1..=N/2-1 on every axis")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField3::zeros(geometry, Representation::Spectral);
    let [n1, n2, n3] = geometry.sizes;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for i3 in 0..n3 {
                let m = [mode_index(i1, n1), mode_index(i2, n2), mode_index(i3, n3)];
                if m == [0, 0, 0] || m.iter().any(|v| v.unsigned_abs() as usize > band) {
                    continue;
                }
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                f.data_mut()[geometry.flat_index(i1, i2, i3)] = c;
            }
        }
    }
    f.symmetrize();
    let norm = f.l2();
    if norm == 0.0 {
        return Err(Error::InvalidInput("random field vanished".into()));
    }
    f.scale(amplitude / norm);
    Ok(f)
}

pub fn gaussian_bump(geometry: TorusGeometry, center: [f64; 3], width: f64, mass: f64) -> Result<SpectralField3> {
    if !(width > 0.0) || !(mass >= 0.0) {
        return Err(Error::InvalidInput(format!("gaussian bump needs width > 0 and mass >= 0, got {width}, {mass}")));
    }
    // The bump is separable, so the image sums are done per axis.
    let profile = |axis: Axis| -> Vec<f64> {
        let a = axis.index();
        let l = geometry.lengths[a];
        let c = center[a].rem_euclid(l);
        (0..geometry.sizes[a])
            .map(|i| {
                let x = geometry.coordinate(axis, i);
                (-1..=1)
                    .map(|m| {
                        let d = x - c + m as f64 * l;
                        (-d * d / (2.0 * width * width)).exp()
                    })
                    .sum()
            })
            .collect()
    };
    let [p1, p2, p3] = [profile(Axis::X1), profile(Axis::X2), profile(Axis::Y)];
    let scale = mass / ((2.0 * PI).powf(1.5) * width.powi(3));
    let mut values = Vec::with_capacity(geometry.len());
    for a in &p1 {
        for b in &p2 {
            for c in &p3 {
                values.push(scale * a * b * c);
            }
        }
    }
    Ok(SpectralField3::from_real(geometry, &values)?.into_spectral())
}
