//! Smallest singular values of complex matrices: dense SVD, and an
//! inverse Lanczos iteration driven by a banded LU factorization.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Which algorithm `sigma_min_with` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaMethod {
    /// Iterative when the band is narrow or the matrix is large, dense otherwise.
    Auto,
    Dense,
    Iterative,
}

/// Above this order `Auto` never falls back to a dense SVD.
pub const DENSE_MAX: usize = 512;

const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_BUDGET: usize = 400;

/// Square matrix with `kl` sub- and `ku` superdiagonals, stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![Complex64::default(); n * (kl + ku + 1)] }
    }

    pub fn from_dense(a: &DMatrix<Complex64>) -> Self {
        let n = a.nrows();
        let (mut kl, mut ku) = (0, 0);
        for j in 0..n {
            for i in 0..n {
                if a[(i, j)] != Complex64::default() {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut b = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                b.set(i, j, a[(i, j)]);
            }
        }
        b
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            Complex64::default()
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    pub fn add_to_diagonal(&mut self, z: Complex64) {
        let w = self.width();
        for i in 0..self.n {
            self.data[i * w + self.kl] += z;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// LU factorization with partial pivoting of a banded matrix, kept as
/// interleaved row swaps and Gauss transforms so that both `A x = b` and
/// `A^H x = b` can be solved.
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Width of a row of `U`: the diagonal plus `kl + ku` superdiagonals.
    width: usize,
    upper: Vec<Complex64>,
    multipliers: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn new(a: &BandedMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let width = kl + ku + 1;
        let win = 2 * kl + ku + 1;
        // Row r is held as a window of `win` entries starting at column start[r].
        let mut rows: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                let mut row = vec![Complex64::default(); win];
                let s = i.saturating_sub(kl);
                for j in s..(i + ku + 1).min(n) {
                    row[j - s] = a.get(i, j);
                }
                row
            })
            .collect();
        let mut start: Vec<usize> = (0..n).map(|i| i.saturating_sub(kl)).collect();
        let mut upper = vec![Complex64::default(); n * width];
        let mut multipliers = vec![Complex64::default(); n * kl.max(1)];
        let mut pivots = vec![0; n];

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            for r in k..=last {
                let shift = k - start[r];
                if shift > 0 {
                    rows[r].rotate_left(shift);
                    let len = rows[r].len();
                    rows[r][len - shift..].fill(Complex64::default());
                    start[r] = k;
                }
            }
            let p = (k..=last)
                .max_by(|&x, &y| rows[x][0].norm().total_cmp(&rows[y][0].norm()).then(y.cmp(&x)))
                .unwrap();
            pivots[k] = p;
            rows.swap(k, p);
            let pivot = rows[k][0];
            if pivot == Complex64::default() {
                return Err(Error::Contract(format!("singular matrix at pivot {k}")));
            }
            let (head, tail) = rows.split_at_mut(k + 1);
            let prow = &head[k];
            for (off, row) in tail[..last - k].iter_mut().enumerate() {
                let l = row[0] / pivot;
                multipliers[k * kl.max(1) + off] = l;
                if l != Complex64::default() {
                    for c in 1..win {
                        row[c] -= l * prow[c];
                    }
                }
                row[0] = Complex64::default();
            }
            upper[k * width..(k + 1) * width].copy_from_slice(&prow[..width]);
        }
        Ok(Self { n, kl, width, upper, multipliers, pivots })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for off in 0..kl.min(n - 1 - k) {
                b[k + 1 + off] -= self.multipliers[k * kl + off] * bk;
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * w..(k + 1) * w];
            let mut s = b[k];
            for c in 1..w.min(n - k) {
                s -= row[c] * b[k + c];
            }
            b[k] = s / row[0];
        }
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let row = &self.upper[k * w..(k + 1) * w];
            let xk = b[k] / row[0].conj();
            b[k] = xk;
            for c in 1..w.min(n - k) {
                b[k + c] -= row[c].conj() * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for off in 0..kl.min(n - 1 - k) {
                s -= self.multipliers[k * kl + off].conj() * b[k + 1 + off];
            }
            b[k] = s;
            b.swap(k, self.pivots[k]);
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of a symmetric tridiagonal matrix and the last
/// component of its unit eigenvector.
fn top_ritz(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    (theta, eig.eigenvectors[(k - 1, idx)])
}

/// Lanczos with full reorthogonalization on `A^{-1} A^{-H}`, whose largest
/// eigenvalue is `1/sigma_min(A)^2`.
fn sigma_min_lanczos(a: &BandedMatrix) -> Result<f64> {
    let lu = BandLu::new(a)?;
    let n = a.n;
    let budget = LANCZOS_BUDGET.min(n);
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (0.618_033_988_75 * i as f64).fract(), (0.414_213_562_37 * i as f64).fract()))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    for j in 0..budget {
        let mut w = v.clone();
        lu.solve_adjoint(&mut w);
        lu.solve(&mut w);
        let alpha = dot(&v, &w).re;
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= alpha * vi;
        }
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= b * pi;
            }
        }
        basis.push(v);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm(&w);
        alphas.push(alpha);
        let k = j + 1;
        // Past 40 steps the Ritz problem is only re-solved every fourth step.
        if k <= 40 || k % 4 == 0 || k == budget || k == n {
            let (theta, s_last) = top_ritz(&alphas, &betas);
            residual = beta * s_last.abs() / theta;
            if residual <= LANCZOS_TOL || k == n || beta <= 1e-14 * theta {
                return Ok(1.0 / theta.sqrt());
            }
        }
        betas.push(beta);
        v = w.into_iter().map(|x| x / beta).collect();
    }
    Err(Error::NoConvergence { iterations: budget, residual })
}

fn sigma_min_dense(a: &DMatrix<Complex64>) -> f64 {
    a.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn sigma_max_dense(a: &DMatrix<Complex64>) -> f64 {
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(a: &DMatrix<Complex64>) -> Result<f64> {
    sigma_min_with(a, SigmaMethod::Auto)
}

pub fn sigma_min_with(a: &DMatrix<Complex64>, method: SigmaMethod) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!("sigma_min needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidInput("sigma_min of an empty matrix".into()));
    }
    match method {
        SigmaMethod::Dense => Ok(sigma_min_dense(a)),
        SigmaMethod::Iterative => sigma_min_lanczos(&BandedMatrix::from_dense(a)),
        SigmaMethod::Auto => sigma_min_banded(&BandedMatrix::from_dense(a)),
    }
}

/// `Auto` route for a matrix already in band storage: the Lanczos iteration
/// when the band is narrow or the order exceeds `DENSE_MAX`, with a dense
/// SVD fallback for small matrices.
pub fn sigma_min_banded(a: &BandedMatrix) -> Result<f64> {
    let n = a.n;
    let narrow = a.kl.max(a.ku) <= n / 16;
    if narrow || n > DENSE_MAX {
        match sigma_min_lanczos(a) {
            Ok(s) => Ok(s),
            Err(Error::Contract(_)) => Ok(0.0),
            Err(e) if n > DENSE_MAX => Err(e),
            Err(_) => Ok(sigma_min_dense(&a.to_dense())),
        }
    } else {
        Ok(sigma_min_dense(&a.to_dense()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, band: Option<usize>, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |i, j| {
            let inside = band.map_or(true, |b| i.abs_diff(j) <= b);
            if inside {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::default()
            }
        })
    }

    #[test]
    fn trivial_examples() {
        let id = DMatrix::<Complex64>::identity(5, 5);
        for m in [SigmaMethod::Dense, SigmaMethod::Iterative, SigmaMethod::Auto] {
            assert!((sigma_min_with(&id, m).unwrap() - 1.0).abs() < 1e-14);
        }
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        for m in [SigmaMethod::Dense, SigmaMethod::Iterative] {
            assert!((sigma_min_with(&d, m).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn random_dense_matches_svd() {
        let a = random_matrix(64, None, 7);
        let dense = sigma_min_with(&a, SigmaMethod::Dense).unwrap();
        let iter = sigma_min_with(&a, SigmaMethod::Iterative).unwrap();
        assert!((dense - iter).abs() < 1e-8 * dense, "{dense} vs {iter}");
    }

    #[test]
    fn random_banded_matches_svd() {
        for (n, band, seed) in [(96, 1, 1), (200, 3, 2), (150, 5, 3)] {
            let a = random_matrix(n, Some(band), seed);
            let dense = sigma_min_with(&a, SigmaMethod::Dense).unwrap();
            let iter = sigma_min_with(&a, SigmaMethod::Iterative).unwrap();
            assert!((dense - iter).abs() < 1e-8 * dense, "n={n}: {dense} vs {iter}");
        }
    }

    #[test]
    fn band_lu_solves_both_systems() {
        let a = random_matrix(40, Some(2), 11);
        let band = BandedMatrix::from_dense(&a);
        assert_eq!(band.bandwidths(), (2, 2));
        let lu = BandLu::new(&band).unwrap();
        let b: Vec<Complex64> = (0..40).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let bv = nalgebra::DVector::from_vec(b.clone());

        let mut x = b.clone();
        lu.solve(&mut x);
        let r = &a * nalgebra::DVector::from_vec(x) - &bv;
        assert!(r.norm() < 1e-10 * bv.norm());

        let mut y = b.clone();
        lu.solve_adjoint(&mut y);
        let r = a.adjoint() * nalgebra::DVector::from_vec(y) - &bv;
        assert!(r.norm() < 1e-10 * bv.norm());
    }

    #[test]
    fn singular_matrix_has_zero_sigma() {
        let mut a = DMatrix::<Complex64>::identity(20, 20);
        a[(7, 7)] = Complex64::default();
        assert_eq!(sigma_min(&a).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_square() {
        let a = DMatrix::<Complex64>::zeros(3, 4);
        assert!(sigma_min(&a).is_err());
    }
}
