//! Explicit right-hand sides of the three model equations.
//!
//! Quadratic terms are formed pseudospectrally with the 2/3 rule. Two real
//! fields share one complex transform (`a + i b`), which halves the FFT count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flows::HelicalFlow;
use crate::integrator::ExplicitRhs;
use crate::spectral::fft::{forward3_banded, inverse3_banded};
use crate::spectral::{mode_index, partner_index, Representation, SpectralField3, TorusGeometry};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Mode tables shared by the pseudospectral products.
struct Modes {
    geometry: TorusGeometry,
    k: [Vec<f64>; 3],
    kept: Vec<bool>,
    /// Flat index of the mode `-n`.
    partner: Vec<usize>,
}

impl Modes {
    fn new(geometry: TorusGeometry) -> Self {
        let sizes = geometry.sizes;
        let band = geometry.dealias_band();
        let k = geometry.wavenumbers();
        let [n1, n2, n3] = sizes;
        let mut kept = Vec::with_capacity(geometry.len());
        let mut partner = Vec::with_capacity(geometry.len());
        let inside = |i: usize, a: usize| mode_index(i, sizes[a]).unsigned_abs() as usize <= band[a];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n3 {
                    kept.push(inside(i1, 0) && inside(i2, 1) && inside(i3, 2));
                    partner.push(geometry.flat_index(
                        partner_index(i1, n1),
                        partner_index(i2, n2),
                        partner_index(i3, n3),
                    ));
                }
            }
        }
        Self { geometry, k, kept, partner }
    }

    #[inline]
    fn wavevector(&self, i: usize) -> [f64; 3] {
        let [_, n2, n3] = self.geometry.sizes;
        let (col, i3) = (i / n3, i % n3);
        [self.k[0][col / n2], self.k[1][col % n2], self.k[2][i3]]
    }

    /// Splits the spectrum `z` of `a + i b` (`a`, `b` real) into the spectra of `a` and `b` at index `i`.
    #[inline]
    fn unpack(&self, z: &[Complex64], i: usize) -> (Complex64, Complex64) {
        let zp = z[self.partner[i]].conj();
        (0.5 * (z[i] + zp), -0.5 * I * (z[i] - zp))
    }
}

fn zero_buffer(n: usize) -> Vec<Complex64> {
    vec![Complex64::default(); n]
}

fn check_input(geometry: &TorusGeometry, state: &SpectralField3, out: &SpectralField3) -> Result<()> {
    geometry.ensure_same(state.geometry())?;
    geometry.ensure_same(out.geometry())?;
    if !state.is_spectral() || !out.is_spectral() {
        return Err(Error::Contract("right-hand sides act on spectral fields".into()));
    }
    Ok(())
}

/// Columns of `f` holding a coefficient above `1e-14` times the largest one,
/// closed under `(n1, n2) -> (-n1, -n2)`.
pub fn active_columns(f: &SpectralField3) -> Vec<usize> {
    let s = f.spectral();
    let [n1, n2, n3] = s.geometry().sizes;
    let max = s.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = 1e-14 * max;
    let mut active = vec![false; n1 * n2];
    for (col, line) in s.data().chunks(n3).enumerate() {
        if line.iter().any(|c| c.norm() > floor) {
            let (i1, i2) = (col / n2, col % n2);
            active[col] = true;
            active[partner_index(i1, n1) * n2 + partner_index(i2, n2)] = true;
        }
    }
    (0..n1 * n2).filter(|&c| active[c]).collect()
}

/// `-v . grad theta` for the advection-diffusion equation.
///
/// With a column restriction only those columns are evaluated; this is exact
/// because advection by a `y`-dependent flow never couples different
/// `(n1, n2)` columns.
pub struct AdvDiffRhs {
    flow: Option<HelicalFlow>,
    columns: Option<Vec<usize>>,
}

impl AdvDiffRhs {
    pub fn new(flow: Option<HelicalFlow>) -> Self {
        Self { flow, columns: None }
    }

    /// Restricts evaluation to the columns active in `initial` when they are
    /// a small part of the grid.
    pub fn with_support_of(mut self, initial: &SpectralField3) -> Self {
        let cols = active_columns(initial);
        let [n1, n2, _] = initial.geometry().sizes;
        if cols.len() * 4 <= n1 * n2 {
            self.columns = Some(cols);
        }
        self
    }
}

impl ExplicitRhs for AdvDiffRhs {
    fn eval(&mut self, state: &SpectralField3, out: &mut SpectralField3) -> Result<()> {
        let Some(flow) = &self.flow else {
            out.data_mut().fill(Complex64::default());
            return Ok(());
        };
        check_input(&flow.geometry, state, out)?;
        flow.advect_into(state, out, self.columns.as_deref())?;
        let n3 = flow.geometry.sizes[2];
        let data = out.data_mut();
        match &self.columns {
            None => data.par_iter_mut().for_each(|c| *c = -*c),
            Some(cols) => {
                for &col in cols {
                    data[col * n3..(col + 1) * n3].iter_mut().for_each(|c| *c = -*c);
                }
            }
        }
        Ok(())
    }

    fn support(&self) -> Option<Vec<usize>> {
        self.columns.clone()
    }
}

/// `-v . grad phi - (nu/2) |grad phi|^2` for the advective KSE.
pub struct KseRhs {
    flow: Option<HelicalFlow>,
    nu: f64,
    modes: Modes,
    grad12: Vec<Complex64>,
    grad3: Vec<Complex64>,
    adv: SpectralField3,
}

impl KseRhs {
    pub fn new(geometry: TorusGeometry, flow: Option<HelicalFlow>, nu: f64) -> Self {
        let n = geometry.len();
        Self {
            flow,
            nu,
            modes: Modes::new(geometry),
            grad12: zero_buffer(n),
            grad3: zero_buffer(n),
            adv: SpectralField3::zeros(geometry, Representation::Spectral),
        }
    }

    /// `dealias(|grad phi|^2)` into `out`.
    fn gradient_square(&mut self, phi: &[Complex64], out: &mut [Complex64]) {
        let m = &self.modes;
        let g = m.geometry;
        self.grad12.par_iter_mut().zip(self.grad3.par_iter_mut()).enumerate().for_each(|(i, (a, b))| {
            if m.kept[i] {
                let [k1, k2, k3] = m.wavevector(i);
                let d = I * phi[i];
                *a = d * k1 + I * (d * k2);
                *b = d * k3;
            } else {
                *a = Complex64::default();
                *b = Complex64::default();
            }
        });
        let band = g.dealias_band();
        inverse3_banded(&mut self.grad12, g.sizes, band);
        inverse3_banded(&mut self.grad3, g.sizes, band);
        out.par_iter_mut().zip(self.grad12.par_iter().zip(self.grad3.par_iter())).for_each(|(o, (a, b))| {
            *o = Complex64::new(a.norm_sqr() + b.re * b.re, 0.0);
        });
        forward3_banded(out, g.sizes, band);
    }
}

impl ExplicitRhs for KseRhs {
    fn eval(&mut self, state: &SpectralField3, out: &mut SpectralField3) -> Result<()> {
        let g = self.modes.geometry;
        check_input(&g, state, out)?;
        self.gradient_square(state.data(), out.data_mut());
        let half_nu = 0.5 * self.nu;
        out.data_mut().par_iter_mut().for_each(|c| *c *= -half_nu);
        if let Some(flow) = &self.flow {
            flow.advect_into(state, &mut self.adv, None)?;
            out.data_mut().par_iter_mut().zip(self.adv.data().par_iter()).for_each(|(o, a)| *o -= a);
        }
        Ok(())
    }
}

/// `-v . grad rho - nu div(rho grad c)` with `-Laplacian c = rho - mean_density`,
/// for the parabolic-elliptic Keller-Segel system.
pub struct KellerSegelRhs {
    flow: Option<HelicalFlow>,
    nu: f64,
    mean_density: f64,
    modes: Modes,
    buf_a: Vec<Complex64>,
    buf_b: Vec<Complex64>,
    adv: SpectralField3,
}

impl KellerSegelRhs {
    pub fn new(geometry: TorusGeometry, flow: Option<HelicalFlow>, nu: f64, mean_density: f64) -> Self {
        let n = geometry.len();
        Self {
            flow,
            nu,
            mean_density,
            modes: Modes::new(geometry),
            buf_a: zero_buffer(n),
            buf_b: zero_buffer(n),
            adv: SpectralField3::zeros(geometry, Representation::Spectral),
        }
    }

    pub fn mean_density(&self) -> f64 {
        self.mean_density
    }

    /// `dealias(div(rho grad c))` into `out`.
    fn chemotactic_flux_divergence(&mut self, rho: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let m = &self.modes;
        let g = m.geometry;
        let deviation = rho[0] - self.mean_density;
        let fluct_l2 = (g.volume() * rho[1..].iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
        let l2 = (fluct_l2 * fluct_l2 + g.volume() * deviation.norm_sqr()).sqrt();
        if deviation.norm() * g.volume().sqrt() > 1e-12 * l2 {
            return Err(Error::PoissonNotMeanFree { mean: deviation.norm(), l2 });
        }
        // buf_a = rho + i dc/dx1, buf_b = dc/dx2 + i dc/dy.
        self.buf_a.par_iter_mut().zip(self.buf_b.par_iter_mut()).enumerate().for_each(|(i, (a, b))| {
            if m.kept[i] && i != 0 {
                let [k1, k2, k3] = m.wavevector(i);
                let c = rho[i] / (k1 * k1 + k2 * k2 + k3 * k3);
                *a = rho[i] + I * (I * k1 * c);
                *b = I * k2 * c + I * (I * k3 * c);
            } else {
                *a = if i == 0 { rho[0] } else { Complex64::default() };
                *b = Complex64::default();
            }
        });
        let band = g.dealias_band();
        inverse3_banded(&mut self.buf_a, g.sizes, band);
        inverse3_banded(&mut self.buf_b, g.sizes, band);
        // buf_a = rho c_1 + i rho c_2, buf_b = rho c_3.
        self.buf_a.par_iter_mut().zip(self.buf_b.par_iter_mut()).for_each(|(a, b)| {
            let r = a.re;
            *a = Complex64::new(r * a.im, r * b.re);
            *b = Complex64::new(r * b.im, 0.0);
        });
        forward3_banded(&mut self.buf_a, g.sizes, band);
        forward3_banded(&mut self.buf_b, g.sizes, band);
        let (fa, fb) = (&self.buf_a, &self.buf_b);
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            if m.kept[i] {
                let [k1, k2, k3] = m.wavevector(i);
                let (f1, f2) = m.unpack(fa, i);
                *o = I * (k1 * f1 + k2 * f2 + k3 * fb[i]);
            } else {
                *o = Complex64::default();
            }
        });
        Ok(())
    }
}

impl ExplicitRhs for KellerSegelRhs {
    fn eval(&mut self, state: &SpectralField3, out: &mut SpectralField3) -> Result<()> {
        let g = self.modes.geometry;
        check_input(&g, state, out)?;
        self.chemotactic_flux_divergence(state.data(), out.data_mut())?;
        let nu = self.nu;
        out.data_mut().par_iter_mut().for_each(|c| *c *= -nu);
        if let Some(flow) = &self.flow {
            flow.advect_into(state, &mut self.adv, None)?;
            out.data_mut().par_iter_mut().zip(self.adv.data().par_iter()).for_each(|(o, a)| *o -= a);
        }
        Ok(())
    }
}

fn evaluate(rhs: &mut dyn ExplicitRhs, state: &SpectralField3) -> Result<SpectralField3> {
    let s = state.spectral();
    let mut out = SpectralField3::zeros(*s.geometry(), Representation::Spectral);
    rhs.eval(&s, &mut out)?;
    Ok(out)
}

/// `-v . grad theta`.
pub fn rhs_adv_diff(flow: Option<&HelicalFlow>, theta: &SpectralField3) -> Result<SpectralField3> {
    evaluate(&mut AdvDiffRhs::new(flow.cloned()), theta)
}

/// `-v . grad phi - (nu/2) dealias(|grad phi|^2)`.
pub fn rhs_kse(flow: Option<&HelicalFlow>, phi: &SpectralField3, nu: f64) -> Result<SpectralField3> {
    evaluate(&mut KseRhs::new(*phi.geometry(), flow.cloned(), nu), phi)
}

/// `-v . grad rho - nu dealias(div(rho grad c))` with `c` solving
/// `-Laplacian c = rho - mean(rho)`.
pub fn rhs_keller_segel(flow: Option<&HelicalFlow>, rho: &SpectralField3, nu: f64) -> Result<SpectralField3> {
    let mean = rho.mean();
    evaluate(&mut KellerSegelRhs::new(*rho.geometry(), flow.cloned(), nu, mean), rho)
}
