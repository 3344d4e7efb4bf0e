//! Shear profiles `u(y)`, the planar helical velocity field built from them
//! and pseudospectral advection by that field.

mod assumption;

pub use assumption::{check_assumption, AssumptionGrids, AssumptionReport, WorstCase};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::fft::{plan, Direction};
use crate::spectral::{mode_index, Axis, Representation, SpectralField3, TorusGeometry, ZeroMode};

/// Shape of the amplitude profile `u(y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProfileShape {
    Constant(f64),
    /// `u(y) = cos(2 pi y / L3)`.
    Cosine,
    /// Grid samples on `[0, L3)`, read as their band-limited interpolant.
    Sampled(Vec<f64>),
}

/// An `L3`-periodic amplitude profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub shape: ProfileShape,
    pub period: f64,
}

/// Coefficients below this fraction of the largest one do not count towards
/// the bandwidth of a sampled profile.
const BAND_CUTOFF: f64 = 1e-13;

impl ShearProfile {
    pub fn constant(value: f64, period: f64) -> Self {
        Self { shape: ProfileShape::Constant(value), period }
    }

    pub fn cosine(period: f64) -> Self {
        Self { shape: ProfileShape::Cosine, period }
    }

    pub fn sampled(values: Vec<f64>, period: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("sampled profile needs at least two values".into()));
        }
        Ok(Self { shape: ProfileShape::Sampled(values), period })
    }

    /// Nonzero Fourier coefficients `(j, u_j)` with `u(y) = sum u_j e^{2 pi i j y / L3}`.
    pub fn fourier_coefficients(&self) -> Vec<(i64, Complex64)> {
        match &self.shape {
            ProfileShape::Constant(a) => {
                if *a == 0.0 {
                    Vec::new()
                } else {
                    vec![(0, Complex64::new(*a, 0.0))]
                }
            }
            ProfileShape::Cosine => vec![(-1, Complex64::new(0.5, 0.0)), (1, Complex64::new(0.5, 0.0))],
            ProfileShape::Sampled(values) => {
                let n = values.len();
                let zm = ZeroMode::from_values(self.period, values);
                let c = zm.coefficients();
                let max = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let mut out = Vec::new();
                for (i, v) in c.iter().enumerate() {
                    if v.norm() <= BAND_CUTOFF * max {
                        continue;
                    }
                    let j = mode_index(i, n);
                    if n % 2 == 0 && i == n / 2 {
                        // Nyquist term split evenly between +-n/2 keeps the interpolant real.
                        out.push((j, v * 0.5));
                        out.push((-j, v * 0.5));
                    } else {
                        out.push((j, *v));
                    }
                }
                out.sort_by_key(|(j, _)| *j);
                out
            }
        }
    }

    /// Largest `|j|` with a nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.fourier_coefficients().iter().map(|(j, _)| j.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.shape {
            ProfileShape::Constant(a) => *a,
            ProfileShape::Cosine => (2.0 * PI * y / self.period).cos(),
            ProfileShape::Sampled(_) => self
                .fourier_coefficients()
                .iter()
                .map(|(j, c)| (c * Complex64::from_polar(1.0, 2.0 * PI * *j as f64 * y / self.period)).re)
                .sum(),
        }
    }

    /// Samples on `n` uniform points of `[0, L3)`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        match &self.shape {
            ProfileShape::Sampled(values) if values.len() == n => values.clone(),
            ProfileShape::Constant(a) => vec![*a; n],
            _ => {
                let coeffs = self.fourier_coefficients();
                (0..n)
                    .map(|i| {
                        let y = i as f64 * self.period / n as f64;
                        coeffs
                            .iter()
                            .map(|(j, c)| (c * Complex64::from_polar(1.0, 2.0 * PI * *j as f64 * y / self.period)).re)
                            .sum()
                    })
                    .collect()
            }
        }
    }

    /// `sup |u|`, exact for the analytic shapes and taken on a 4096-point
    /// grid for sampled ones.
    pub fn max_abs(&self) -> f64 {
        match &self.shape {
            ProfileShape::Constant(a) => a.abs(),
            ProfileShape::Cosine => 1.0,
            ProfileShape::Sampled(_) => self.samples(4096).iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl fmt::Display for ShearProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            ProfileShape::Constant(a) => write!(f, "constant:{a}"),
            ProfileShape::Cosine => write!(f, "cosine"),
            ProfileShape::Sampled(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                write!(f, "sampled:{}", parts.join(","))
            }
        }
    }
}

/// Profile description as written in configuration files: `constant:A`,
/// `cosine`, `sampled:v0,v1,...` or `none` (zero flow). The period is filled
/// in later from the geometry.
impl FromStr for ProfileShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (s, None),
        };
        let bad = |msg: &str| Error::InvalidInput(format!("profile `{s}`: {msg}"));
        match (head, tail) {
            ("none" | "zero", None) => Ok(ProfileShape::Constant(0.0)),
            ("cosine" | "cos", None) => Ok(ProfileShape::Cosine),
            ("constant", None) => Ok(ProfileShape::Constant(1.0)),
            ("constant", Some(v)) => v.parse().map(ProfileShape::Constant).map_err(|_| bad("bad amplitude")),
            ("sampled", Some(v)) => {
                let values: std::result::Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
                let values = values.map_err(|_| bad("bad sample value"))?;
                if values.len() < 2 {
                    return Err(bad("need at least two samples"));
                }
                Ok(ProfileShape::Sampled(values))
            }
            _ => Err(bad("expected none, constant[:A], cosine or sampled:v0,v1,...")),
        }
    }
}

/// The divergence-free velocity `v(y) = (u sin(2 pi y/L3), u cos(2 pi y/L3), 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelicalFlow {
    pub profile: ShearProfile,
    pub geometry: TorusGeometry,
}

impl HelicalFlow {
    pub fn new(profile: ShearProfile, geometry: TorusGeometry) -> Result<Self> {
        let l3 = geometry.lengths[2];
        if (profile.period - l3).abs() > 1e-12 * l3 {
            return Err(Error::GeometryMismatch(format!(
                "profile period {} differs from L3 = {l3}",
                profile.period
            )));
        }
        Ok(Self { profile, geometry })
    }

    pub fn velocity_at(&self, y: f64) -> [f64; 3] {
        let u = self.profile.eval(y);
        let theta = 2.0 * PI * y / self.geometry.lengths[2];
        [u * theta.sin(), u * theta.cos(), 0.0]
    }

    /// The two nonzero velocity components on the `y` grid.
    pub fn eval_velocity(&self) -> (Vec<f64>, Vec<f64>) {
        let n3 = self.geometry.sizes[2];
        let u = self.profile.samples(n3);
        (0..n3)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / n3 as f64;
                (u[i] * theta.sin(), u[i] * theta.cos())
            })
            .unzip()
    }

    /// `sup |v|`, which equals `sup |u|`.
    pub fn max_speed(&self) -> f64 {
        self.profile.max_abs()
    }

    /// The three velocity components as fields on the grid.
    pub fn velocity_fields(&self) -> [SpectralField3; 3] {
        let (v1, v2) = self.eval_velocity();
        let g = self.geometry;
        let n3 = g.sizes[2];
        let build = |v: &[f64]| {
            let values: Vec<f64> = (0..g.len()).map(|i| v[i % n3]).collect();
            SpectralField3::from_real(g, &values).expect("grid sized data")
        };
        [build(&v1), build(&v2), SpectralField3::zeros(g, Representation::Physical)]
    }

    /// Spectral divergence of the velocity field.
    pub fn divergence(&self) -> Result<SpectralField3> {
        let [a, b, c] = self.velocity_fields();
        let mut div = a.deriv(Axis::X1, 1)?;
        div.axpy(1.0, &b.deriv(Axis::X2, 1)?)?;
        div.axpy(1.0, &c.deriv(Axis::Y, 1)?)?;
        Ok(div)
    }

    /// `v . grad f`, dealiased, as a spectral field.
    ///
    /// Because `v` depends on `y` only, each `(n1, n2)` column is handled
    /// independently: it is synthesized along `y`, multiplied by
    /// `i (k1 v1(y) + k2 v2(y))` and analysed again. Columns that are zero or
    /// outside the retained band are skipped.
    pub fn advect(&self, f: &SpectralField3) -> Result<SpectralField3> {
        let mut out = SpectralField3::zeros(self.geometry, Representation::Spectral);
        self.advect_into(&f.spectral(), &mut out, None)?;
        Ok(out)
    }

    /// `advect` writing into `out`, optionally only on the listed columns
    /// (flat indices `i1 * N2 + i2`); other columns of `out` are untouched.
    pub fn advect_into(&self, f: &SpectralField3, out: &mut SpectralField3, columns: Option<&[usize]>) -> Result<()> {
        self.geometry.ensure_same(f.geometry())?;
        self.geometry.ensure_same(out.geometry())?;
        if !f.is_spectral() || !out.is_spectral() {
            return Err(Error::Contract("advect_into expects spectral fields".into()));
        }
        let g = self.geometry;
        let [n1, n2, n3] = g.sizes;
        let no_flow = self.profile.fourier_coefficients().is_empty();
        let (v1, v2) = self.eval_velocity();
        let band = g.dealias_band();
        let [kx1, kx2, _] = g.wavenumbers();
        let inv = plan(n3, Direction::Inverse);
        let fwd = plan(n3, Direction::Forward);
        let scratch_len = inv.get_inplace_scratch_len().max(fwd.get_inplace_scratch_len());
        let scale = 1.0 / n3 as f64;
        let src_data = f.data();
        let column = |scratch: &mut Vec<Complex64>, col: usize, line: &mut [Complex64]| {
            line.fill(Complex64::default());
            let (i1, i2) = (col / n2, col % n2);
            if no_flow
                || mode_index(i1, n1).unsigned_abs() as usize > band[0]
                || mode_index(i2, n2).unsigned_abs() as usize > band[1]
            {
                return;
            }
            // Odd derivatives drop the Nyquist mode.
            let k1 = if i1 == n1 / 2 { 0.0 } else { kx1[i1] };
            let k2 = if i2 == n2 / 2 { 0.0 } else { kx2[i2] };
            if k1 == 0.0 && k2 == 0.0 {
                return;
            }
            let s = &src_data[col * n3..(col + 1) * n3];
            if s.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                return;
            }
            line.copy_from_slice(s);
            inv.process_with_scratch(line, scratch);
            for (j, c) in line.iter_mut().enumerate() {
                *c *= Complex64::new(0.0, k1 * v1[j] + k2 * v2[j]);
            }
            fwd.process_with_scratch(line, scratch);
            for (i3, c) in line.iter_mut().enumerate() {
                if mode_index(i3, n3).unsigned_abs() as usize > band[2] {
                    *c = Complex64::default();
                } else {
                    *c *= scale;
                }
            }
        };
        match columns {
            None => out.data_mut().par_chunks_mut(n3).enumerate().for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, (col, line)| column(scratch, col, line),
            ),
            Some(cols) => {
                let mut scratch = vec![Complex64::default(); scratch_len];
                let data = out.data_mut();
                for &col in cols {
                    column(&mut scratch, col, &mut data[col * n3..(col + 1) * n3]);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> TorusGeometry {
        TorusGeometry::cube(2.0 * PI, n).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let g = TorusGeometry::new([1.0, 1.0, 4.0], [8, 8, 8]).unwrap();
        let one = HelicalFlow::new(ShearProfile::constant(1.0, 4.0), g).unwrap();
        let v = one.velocity_at(0.0);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let v = one.velocity_at(1.0);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let cos = HelicalFlow::new(ShearProfile::cosine(4.0), g).unwrap();
        // u(2) = -1 and the rotation angle is pi, so v = (0, 1, 0).
        let v = cos.velocity_at(2.0);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let (v1, v2) = cos.eval_velocity();
        assert!((v2[4] - 1.0).abs() < 1e-15 && v1[4].abs() < 1e-15);
    }

    #[test]
    fn profile_parsing_and_coefficients() {
        assert_eq!("constant:2.5".parse::<ProfileShape>().unwrap(), ProfileShape::Constant(2.5));
        assert_eq!("none".parse::<ProfileShape>().unwrap(), ProfileShape::Constant(0.0));
        assert_eq!("cosine".parse::<ProfileShape>().unwrap(), ProfileShape::Cosine);
        assert!("wobbly".parse::<ProfileShape>().is_err());
        let sampled: Vec<f64> = (0..16).map(|i| (2.0 * PI * i as f64 / 16.0).cos()).collect();
        let p = ShearProfile::sampled(sampled, 2.0 * PI).unwrap();
        assert_eq!(p.bandwidth(), 1);
        assert!((p.eval(0.3) - 0.3f64.cos()).abs() < 1e-13);
        assert_eq!(ShearProfile::constant(0.0, 1.0).bandwidth(), 0);
    }

    #[test]
    fn divergence_free() {
        let g = cube(16);
        for p in [ShearProfile::constant(1.0, 2.0 * PI), ShearProfile::cosine(2.0 * PI)] {
            let flow = HelicalFlow::new(p, g).unwrap();
            let vnorm = flow.velocity_fields()[0].l2() + flow.velocity_fields()[1].l2();
            assert!(flow.divergence().unwrap().l2() < 1e-12 * vnorm);
        }
    }

    #[test]
    fn advection_of_y_function_vanishes() {
        let g = cube(16);
        let flow = HelicalFlow::new(ShearProfile::cosine(2.0 * PI), g).unwrap();
        let f = SpectralField3::from_fn(g, |_, _, y| (2.0 * y).sin() + y.cos());
        assert_eq!(flow.advect(&f).unwrap().l2(), 0.0);
    }

    #[test]
    fn advection_single_harmonic() {
        let g = TorusGeometry::new([3.0, 2.0 * PI, 2.0 * PI], [16, 16, 16]).unwrap();
        let l1 = 3.0;
        let flow = HelicalFlow::new(ShearProfile::constant(1.0, 2.0 * PI), g).unwrap();
        let f = SpectralField3::from_fn(g, |x, _, _| (2.0 * PI * x / l1).sin());
        let a = flow.advect(&f).unwrap().physical();
        let k = 2.0 * PI / l1;
        let expect = SpectralField3::from_fn(g, |x, _, y| k * y.sin() * (k * x).cos());
        let mut d = a;
        d.axpy(-1.0, &expect).unwrap();
        assert!(d.linf() < 1e-12);
    }

    #[test]
    fn advection_is_skew_on_dealiased_fields() {
        let g = TorusGeometry::new([2.0, 3.0, 5.0], [32, 32, 32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let values: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = SpectralField3::from_real(g, &values).unwrap().dealiased();
        for p in [ShearProfile::constant(1.0, 5.0), ShearProfile::cosine(5.0)] {
            let flow = HelicalFlow::new(p, g).unwrap();
            let a = flow.advect(&f).unwrap();
            let ip = a.inner(&f).unwrap();
            assert!(ip.abs() < 1e-10 * f.l2().powi(2), "inner product {ip}");
            assert!(a.imaginary_residue() < 1e-12);
        }
    }

    #[test]
    fn advection_preserves_column_support() {
        let g = cube(16);
        let flow = HelicalFlow::new(ShearProfile::cosine(2.0 * PI), g).unwrap();
        let f = SpectralField3::from_fn(g, |x, z, y| (2.0 * x + z).cos() * (1.0 + y.sin()));
        let a = flow.advect(&f).unwrap();
        let [n1, n2, n3] = g.sizes;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let (m1, m2) = (mode_index(i1, n1), mode_index(i2, n2));
                if (m1, m2) == (2, 1) || (m1, m2) == (-2, -1) {
                    continue;
                }
                for i3 in 0..n3 {
                    assert!(a.data()[g.flat_index(i1, i2, i3)].norm() < 1e-14);
                }
            }
        }
        assert!(a.l2() > 0.1);
    }
}
