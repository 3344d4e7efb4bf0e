//! The advection-diffusion operator restricted to one horizontal Fourier
//! mode, written as a matrix in the `y`-Fourier basis, and the estimate
//! `Psi = inf over lambda and unit g of |(H - i lambda) g|` of its
//! pseudospectral abscissa.

mod linalg;

pub use linalg::{sigma_max_dense, sigma_min, sigma_min_banded, sigma_min_with, BandLu, BandedMatrix, SigmaMethod, DENSE_MAX};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::ShearProfile;
use crate::spectral::{ModePair, TorusGeometry};
use crate::stats::linear_fit;

/// Points used to locate the extrema of `u(y) sin(2 pi y/L3 + alpha)`.
const PROFILE_GRID: usize = 4096;

/// Everything needed to build the single-mode operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub nu: f64,
    pub gamma: u32,
    pub k: ModePair,
    pub geometry: TorusGeometry,
    pub profile: ShearProfile,
    /// Number of `y`-Fourier modes kept.
    pub ny: usize,
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidInput(format!("nu must be positive, got {}", self.nu)));
        }
        if self.gamma != 1 && self.gamma != 2 {
            return Err(Error::InvalidInput(format!("gamma must be 1 or 2, got {}", self.gamma)));
        }
        if self.k.is_zero() {
            return Err(Error::InvalidInput("horizontal mode k must be nonzero".into()));
        }
        if self.ny < 16 || self.ny % 2 != 0 {
            return Err(Error::InvalidInput(format!("Ny must be even and >= 16, got {}", self.ny)));
        }
        let l3 = self.geometry.lengths[2];
        if (self.profile.period - l3).abs() > 1e-12 * l3 {
            return Err(Error::GeometryMismatch(format!("profile period {} but L3 = {l3}", self.profile.period)));
        }
        Ok(())
    }

    /// Horizontal wavevector `(k1, k2)`.
    pub fn wavevector(&self) -> (f64, f64) {
        self.k.wavevector(self.geometry.lengths[0], self.geometry.lengths[1])
    }

    pub fn k_norm(&self) -> f64 {
        let (k1, k2) = self.wavevector();
        k1.hypot(k2)
    }

    /// Phase `alpha_k` with `k1 sin(t) + k2 cos(t) = |k| sin(t + alpha_k)`.
    pub fn phase(&self) -> f64 {
        let (k1, k2) = self.wavevector();
        k2.atan2(k1)
    }

    /// `nu |k|^(2 gamma)`: the smallest eigenvalue of the diffusion part.
    pub fn diffusion_floor(&self) -> f64 {
        self.nu * self.k_norm().powi(2 * self.gamma as i32)
    }

    /// `nu / |k| > 1` lies outside the regime where the scaling law is proved.
    pub fn outside_hypothesis(&self) -> bool {
        self.nu / self.k_norm() > 1.0
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu, ..self.clone() }
    }

    pub fn with_ny(&self, ny: usize) -> Self {
        Self { ny, ..self.clone() }
    }

    /// `lambda` range `|k| [min f - 1, max f + 1]` with `f = u(y) sin(2 pi y/L3 + alpha_k)`.
    pub fn lambda_bracket(&self) -> [f64; 2] {
        let alpha = self.phase();
        let u = self.profile.samples(PROFILE_GRID);
        let (lo, hi) = u.iter().enumerate().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (j, uj)| {
            let f = uj * (2.0 * PI * j as f64 / PROFILE_GRID as f64 + alpha).sin();
            (lo.min(f), hi.max(f))
        });
        let kn = self.k_norm();
        [kn * (lo - 1.0), kn * (hi + 1.0)]
    }
}

/// Coefficients of `g(y) = k1 u(y) sin(2 pi y/L3) + k2 u(y) cos(2 pi y/L3)`.
fn advection_coefficients(spec: &OperatorSpec) -> Vec<(i64, Complex64)> {
    let (k1, k2) = spec.wavevector();
    let mut out: Vec<(i64, Complex64)> = Vec::new();
    let mut add = |j: i64, c: Complex64| match out.iter_mut().find(|(i, _)| *i == j) {
        Some((_, v)) => *v += c,
        None => out.push((j, c)),
    };
    // sin = (e^{i.} - e^{-i.}) / 2i and cos = (e^{i.} + e^{-i.}) / 2.
    let up = Complex64::new(0.5 * k2, -0.5 * k1);
    let down = Complex64::new(0.5 * k2, 0.5 * k1);
    for (j, c) in spec.profile.fourier_coefficients() {
        add(j + 1, c * up);
        add(j - 1, c * down);
    }
    out.retain(|(_, c)| *c != Complex64::default());
    out.sort_by_key(|(j, _)| *j);
    out
}

fn mode_of(i: usize, ny: usize) -> i64 {
    i as i64 - (ny / 2) as i64
}

/// The operator in band storage; row and column `i` hold the mode `m = i - Ny/2`.
pub fn build_banded(spec: &OperatorSpec) -> Result<BandedMatrix> {
    spec.validate()?;
    let ny = spec.ny;
    let band = spec.profile.bandwidth() + 1;
    if spec.profile.fourier_coefficients().is_empty() {
        // u = 0 has no advection part at all.
    } else if band >= ny / 2 {
        return Err(Error::BandwidthExceedsTruncation { band, ny });
    }
    let coeffs = advection_coefficients(spec);
    let width = coeffs.iter().map(|(j, _)| j.unsigned_abs() as usize).max().unwrap_or(0);
    let mut a = BandedMatrix::zeros(ny, width, width);
    let kk = spec.k_norm().powi(2);
    let l3 = spec.geometry.lengths[2];
    for i in 0..ny {
        let q = 2.0 * PI * mode_of(i, ny) as f64 / l3;
        a.set(i, i, Complex64::new(spec.nu * (kk + q * q).powi(spec.gamma as i32), 0.0));
    }
    let iu = Complex64::i();
    for i in 0..ny {
        for &(j, c) in &coeffs {
            let col = i as i64 - j;
            if (0..ny as i64).contains(&col) {
                let col = col as usize;
                a.set(i, col, a.get(i, col) + iu * c);
            }
        }
    }
    Ok(a)
}

/// Dense `Ny x Ny` matrix of the operator.
pub fn build_matrix(spec: &OperatorSpec) -> Result<DMatrix<Complex64>> {
    Ok(build_banded(spec)?.to_dense())
}

/// Controls for the `lambda` search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub coarse_points: usize,
    /// Refinement stops when the bracket is narrower than this fraction of
    /// the full search range.
    pub refine_tol: f64,
    /// Number of coarse local minima that are refined.
    pub refine_candidates: usize,
    /// Recompute at `2 Ny` to decide `converged_in_ny`.
    pub check_doubling: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { coarse_points: 257, refine_tol: 1e-9, refine_candidates: 3, check_doubling: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub value: f64,
    pub lambda_star: f64,
    pub ny: usize,
    pub bracket: [f64; 2],
    pub refinement_tol: f64,
    pub converged_in_ny: bool,
    /// Estimate at `2 Ny`, when it was computed.
    pub value_doubled: Option<f64>,
    pub outside_hypothesis: bool,
    pub nu: f64,
}

/// Minimum of `lambda -> sigma_min(A - i lambda)` over `bracket`.
/// Returns `(Psi, lambda_star)`.
pub fn psi_of_banded(a: &BandedMatrix, bracket: [f64; 2], search: &SearchOptions) -> Result<(f64, f64)> {
    let [lo, hi] = bracket;
    if !(hi > lo) || search.coarse_points < 3 {
        return Err(Error::InvalidInput(format!("bad lambda search: bracket {bracket:?}, {} points", search.coarse_points)));
    }
    let eval = |lambda: f64| -> Result<f64> {
        let mut shifted = a.clone();
        shifted.add_to_diagonal(Complex64::new(0.0, -lambda));
        sigma_min_banded(&shifted)
    };
    let n = search.coarse_points;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let values = grid.par_iter().map(|&l| eval(l)).collect::<Result<Vec<f64>>>()?;

    let mut samples: Vec<(f64, f64)> = grid.iter().cloned().zip(values.iter().cloned()).collect();

    // Coarse local minima, best first.
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || values[i] <= values[i - 1]) && (i == n - 1 || values[i] <= values[i + 1]))
        .collect();
    minima.sort_by(|&x, &y| values[x].total_cmp(&values[y]).then(x.cmp(&y)));
    minima.truncate(search.refine_candidates.max(1));

    let stop = search.refine_tol * (hi - lo);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    for &i in &minima {
        let (mut a_, mut b_) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
        let mut x1 = b_ - golden * (b_ - a_);
        let mut x2 = a_ + golden * (b_ - a_);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        samples.push((x1, f1));
        samples.push((x2, f2));
        while b_ - a_ > stop {
            if f1 <= f2 {
                b_ = x2;
                x2 = x1;
                f2 = f1;
                x1 = b_ - golden * (b_ - a_);
                f1 = eval(x1)?;
                samples.push((x1, f1));
            } else {
                a_ = x1;
                x1 = x2;
                f1 = f2;
                x2 = a_ + golden * (b_ - a_);
                f2 = eval(x2)?;
                samples.push((x2, f2));
            }
        }
    }

    // Smallest value; near-ties (relative 1e-12) go to the smallest |lambda|,
    // then the lower lambda.
    let vmin = samples.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let best = samples
        .iter()
        .cloned()
        .filter(|p| p.1 <= vmin + 1e-12 * vmin.abs())
        .min_by(|p, q| p.0.abs().total_cmp(&q.0.abs()).then(p.0.total_cmp(&q.0)))
        .unwrap();
    Ok((best.1, best.0))
}

/// `psi_of_banded` for a dense matrix.
pub fn psi_of_matrix(a: &DMatrix<Complex64>, bracket: [f64; 2], search: &SearchOptions) -> Result<(f64, f64)> {
    psi_of_banded(&BandedMatrix::from_dense(a), bracket, search)
}

/// Relative change under `Ny -> 2 Ny` that still counts as converged.
pub const DOUBLING_TOL: f64 = 0.01;

pub fn psi(spec: &OperatorSpec, search: &SearchOptions) -> Result<PsiEstimate> {
    let a = build_banded(spec)?;
    let bracket = spec.lambda_bracket();
    let (value, lambda_star) = psi_of_banded(&a, bracket, search)?;
    let value_doubled = if search.check_doubling {
        let fine = build_banded(&spec.with_ny(2 * spec.ny))?;
        Some(psi_of_banded(&fine, bracket, search)?.0)
    } else {
        None
    };
    let converged_in_ny = value_doubled.map_or(false, |d| (d - value).abs() < DOUBLING_TOL * value);
    if spec.outside_hypothesis() {
        log::warn!("nu/|k| = {} > 1 is outside the proven scaling regime", spec.nu / spec.k_norm());
    }
    Ok(PsiEstimate {
        value,
        lambda_star,
        ny: spec.ny,
        bracket,
        refinement_tol: search.refine_tol,
        converged_in_ny,
        value_doubled,
        outside_hypothesis: spec.outside_hypothesis(),
        nu: spec.nu,
    })
}

/// Largest `Ny` accepted by `semigroup_norm`.
pub const SEMIGROUP_MAX_NY: usize = 512;

/// Operator 2-norm of `exp(-t A)`.
pub fn semigroup_norm(spec: &OperatorSpec, t: f64) -> Result<f64> {
    if spec.ny > SEMIGROUP_MAX_NY {
        return Err(Error::MatrixTooLarge { ny: spec.ny, max: SEMIGROUP_MAX_NY });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    let a = build_matrix(spec)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let e = (a * Complex64::new(-t, 0.0)).exp();
    Ok(sigma_max_dense(&e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of `log Psi` against `log nu`.
    pub beta: f64,
    pub r2: f64,
    /// `C` in `Psi ~ C nu^beta`.
    pub prefactor: f64,
    pub per_nu: Vec<PsiEstimate>,
}

/// Estimates `Psi` for each `nu` (template's `nu` is ignored).
pub fn psi_sweep(template: &OperatorSpec, nus: &[f64], search: &SearchOptions) -> Result<Vec<PsiEstimate>> {
    nus.iter().map(|&nu| psi(&template.with_nu(nu), search)).collect()
}

/// Power-law fit of already computed estimates.
pub fn fit_scaling(per_nu: Vec<PsiEstimate>) -> Result<ScalingFit> {
    let bad: Vec<f64> = per_nu.iter().filter(|e| !e.converged_in_ny).map(|e| e.nu).collect();
    if !bad.is_empty() {
        return Err(Error::NotConverged { nus: bad });
    }
    let x: Vec<f64> = per_nu.iter().map(|e| e.nu.ln()).collect();
    let y: Vec<f64> = per_nu.iter().map(|e| e.value.ln()).collect();
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::InvalidInput("scaling fit needs distinct nu values".into()))?;
    Ok(ScalingFit { beta: fit.slope, r2: fit.r2, prefactor: fit.intercept.exp(), per_nu })
}

/// Sweeps `nus` (at least five values over at least three decades) and fits
/// `Psi ~ C nu^beta`.
pub fn scaling_fit(template: &OperatorSpec, nus: &[f64], search: &SearchOptions) -> Result<ScalingFit> {
    if nus.len() < 5 {
        return Err(Error::InvalidInput(format!("scaling fit needs at least 5 values of nu, got {}", nus.len())));
    }
    let (lo, hi) = nus.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("nu values span less than three decades ({lo:e} to {hi:e})")));
    }
    let search = SearchOptions { check_doubling: true, ..*search };
    fit_scaling(psi_sweep(template, nus, &search)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(profile: ShearProfile, nu: f64, gamma: u32, ny: usize) -> OperatorSpec {
        OperatorSpec {
            nu,
            gamma,
            k: ModePair::new(1, 0),
            geometry: TorusGeometry::cube(2.0 * PI, 16).unwrap(),
            profile,
            ny,
        }
    }

    fn two_pi() -> f64 {
        2.0 * PI
    }

    #[test]
    fn diagonal_without_flow() {
        let s = spec(ShearProfile::constant(0.0, two_pi()), 0.01, 1, 16);
        let a = build_matrix(&s).unwrap();
        for i in 0..16 {
            let m = i as f64 - 8.0;
            assert!((a[(i, i)].re - 0.01 * (1.0 + m * m)).abs() < 1e-15);
            for j in 0..16 {
                if i != j {
                    assert_eq!(a[(i, j)], Complex64::default());
                }
            }
        }
    }

    #[test]
    fn constant_flow_couples_neighbours() {
        let s = spec(ShearProfile::constant(1.0, two_pi()), 0.01, 1, 16);
        let a = build_matrix(&s).unwrap();
        // i sin(y) acts as e^{iy}/2 - e^{-iy}/2: row m picks up g_{m-1}/2 - g_{m+1}/2.
        assert!((a[(5, 4)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((a[(5, 6)] - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(a[(5, 7)], Complex64::default());
    }

    /// Compares against the convolution matrix of samples of
    /// `i u(y) sin(y)` computed by quadrature on a fine grid.
    #[test]
    fn cosine_flow_matches_quadrature() {
        let s = spec(ShearProfile::cosine(two_pi()), 1e-3, 1, 16);
        let a = build_matrix(&s).unwrap();
        let q = 64;
        let coeff = |j: i64| -> Complex64 {
            (0..q)
                .map(|l| {
                    let y = two_pi() * l as f64 / q as f64;
                    Complex64::new(0.0, y.cos() * y.sin()) * Complex64::from_polar(1.0, -(j as f64) * y)
                })
                .sum::<Complex64>()
                / q as f64
        };
        for i in 0..16 {
            for j in 0..16 {
                if i == j {
                    continue;
                }
                let expect = coeff(i as i64 - j as i64);
                assert!((a[(i, j)] - expect).norm() < 1e-14, "({i},{j})");
            }
        }
        assert!((a[(5, 3)].re - 0.25).abs() < 1e-15 && a[(5, 4)].norm() < 1e-15);
    }

    #[test]
    fn bandwidth_check() {
        let values: Vec<f64> = (0..32).map(|i| (2.0 * PI * 7.0 * i as f64 / 32.0).cos()).collect();
        let s = spec(ShearProfile::sampled(values, two_pi()).unwrap(), 0.01, 1, 16);
        assert!(matches!(build_matrix(&s), Err(Error::BandwidthExceedsTruncation { band: 8, ny: 16 })));
        assert!(build_matrix(&s.with_ny(32)).is_ok());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(ShearProfile::constant(1.0, two_pi()), 0.01, 1, 16);
        s.k = ModePair::new(0, 0);
        assert!(s.validate().is_err());
        let s = spec(ShearProfile::constant(1.0, two_pi()), 0.01, 3, 16);
        assert!(s.validate().is_err());
        let s = spec(ShearProfile::constant(1.0, two_pi()), 0.01, 1, 14);
        assert!(s.validate().is_err());
    }

    #[test]
    fn psi_without_flow_is_diffusion_floor() {
        for gamma in [1, 2] {
            let s = spec(ShearProfile::constant(0.0, two_pi()), 0.01, gamma, 32);
            let e = psi(&s, &SearchOptions::default()).unwrap();
            assert!((e.value - 0.01).abs() < 1e-12, "{}", e.value);
            assert_eq!(e.lambda_star, 0.0);
            assert!(e.converged_in_ny);
        }
    }

    #[test]
    fn psi_shrinks_like_square_root_of_nu() {
        let search = SearchOptions::default();
        let a = psi(&spec(ShearProfile::constant(1.0, two_pi()), 1e-2, 1, 64), &search).unwrap();
        let b = psi(&spec(ShearProfile::constant(1.0, two_pi()), 1e-4, 1, 128), &search).unwrap();
        assert!(a.converged_in_ny && b.converged_in_ny);
        let ratio = b.value / a.value;
        assert!(ratio > 0.1f64.powf(1.2) && ratio < 0.1f64.powf(0.8), "ratio {ratio}");
        assert!(b.value >= 1e-4 * (1.0 - 1e-6));
    }

    #[test]
    fn shift_covariance() {
        let s = spec(ShearProfile::cosine(two_pi()), 1e-3, 1, 64);
        let a = build_matrix(&s).unwrap();
        let c = 0.37;
        let shifted = &a + DMatrix::<Complex64>::identity(64, 64) * Complex64::new(0.0, c);
        let [lo, hi] = s.lambda_bracket();
        let search = SearchOptions::default();
        let (p0, l0) = psi_of_matrix(&a, [lo, hi], &search).unwrap();
        let (p1, l1) = psi_of_matrix(&shifted, [lo + c, hi + c], &search).unwrap();
        assert!((p0 - p1).abs() < 1e-10 * p0, "{p0} vs {p1}");
        assert!((l1 - l0 - c).abs() < 1e-6);
    }

    #[test]
    fn semigroup_trivial_cases() {
        let s = spec(ShearProfile::constant(1.0, two_pi()), 1e-3, 1, 32);
        assert_eq!(semigroup_norm(&s, 0.0).unwrap(), 1.0);
        let s0 = spec(ShearProfile::constant(0.0, two_pi()), 0.1, 1, 32);
        for t in [0.5, 3.0] {
            assert!((semigroup_norm(&s0, t).unwrap() - (-0.1 * t as f64).exp()).abs() < 1e-12);
        }
        assert!(matches!(semigroup_norm(&s.with_ny(1024), 1.0), Err(Error::MatrixTooLarge { .. })));
    }

    #[test]
    fn scaling_without_flow_is_linear() {
        let s = spec(ShearProfile::constant(0.0, two_pi()), 1.0, 1, 16);
        let nus = [1e-4, 1e-3, 1e-2, 1e-1, 0.5];
        let fit = scaling_fit(&s, &nus, &SearchOptions::default()).unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-10 && (fit.r2 - 1.0).abs() < 1e-10);
        assert!(scaling_fit(&s, &nus[..4], &SearchOptions::default()).is_err());
    }
}
