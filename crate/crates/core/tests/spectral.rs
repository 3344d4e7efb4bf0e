use std::collections::HashMap;
use std::f64::consts::PI;

use helical::spectral::{Axis, Representation, SpectralField3, TorusGeometry};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(g: TorusGeometry, seed: u64) -> SpectralField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SpectralField3::from_real(g, &values).unwrap()
}

fn max_coeff_diff(a: &SpectralField3, b: &SpectralField3) -> f64 {
    let (a, b) = (a.spectral(), b.spectral());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn poisson_residual_on_random_field() {
    let g = TorusGeometry::new([2.0, 3.0, 5.0], [32, 32, 32]).unwrap();
    let mut f = random_field(g, 11).into_spectral();
    f.set_coeff([0, 0, 0], Complex64::default());
    let c = f.invert_neg_laplacian().unwrap();
    // Oracle: apply -Laplacian to the solution.
    let mut back = c.laplacian();
    back.scale(-1.0);
    back.axpy(-1.0, &f).unwrap();
    assert!(back.l2() < 1e-12 * f.l2(), "residual {}", back.l2() / f.l2());
    assert!(c.mean().abs() < 1e-15);
}

/// Sparse coefficient list `(mode, coefficient)` of a real field.
fn harmonics(modes: &[([i64; 3], Complex64)]) -> Vec<([i64; 3], Complex64)> {
    let mut out = Vec::new();
    for &(n, c) in modes {
        out.push((n, c));
        out.push((n.map(|m| -m), c.conj()));
    }
    out
}

fn field_of(g: TorusGeometry, coeffs: &[([i64; 3], Complex64)]) -> SpectralField3 {
    let mut f = SpectralField3::zeros(g, Representation::Spectral);
    for &(n, c) in coeffs {
        f.set_coeff(n, f.coeff(n) + c);
    }
    f
}

#[test]
fn dealiased_product_equals_direct_convolution() {
    let g = TorusGeometry::new([2.0 * PI, 3.0, 4.0], [24, 24, 24]).unwrap();
    let band = 8;
    let a = harmonics(&[
        ([1, 0, 2], Complex64::new(0.3, -0.2)),
        ([3, -2, 5], Complex64::new(0.1, 0.4)),
        ([0, 4, -7], Complex64::new(-0.5, 0.0)),
        ([6, 6, 6], Complex64::new(0.2, 0.2)),
    ]);
    let b = harmonics(&[
        ([2, 1, -1], Complex64::new(0.7, 0.1)),
        ([-5, 3, 4], Complex64::new(0.0, -0.3)),
        ([7, 0, 0], Complex64::new(0.25, 0.5)),
        ([4, -8, 2], Complex64::new(-0.1, 0.6)),
    ]);
    let fa = field_of(g, &a);
    let fb = field_of(g, &b);
    let pa = fa.real_values();
    let pb = fb.real_values();
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    let computed = SpectralField3::from_real(g, &prod).unwrap().into_spectral().dealiased();

    let mut conv: HashMap<[i64; 3], Complex64> = HashMap::new();
    for &(m, cm) in &a {
        for &(n, cn) in &b {
            let s = [m[0] + n[0], m[1] + n[1], m[2] + n[2]];
            if s.iter().all(|v| v.unsigned_abs() as usize <= band) {
                *conv.entry(s).or_default() += cm * cn;
            }
        }
    }
    let expected = field_of(g, &conv.into_iter().collect::<Vec<_>>());
    assert!(max_coeff_diff(&computed, &expected) < 1e-14);
}

#[test]
fn h1dot_is_the_weighted_mode_sum() {
    let g = TorusGeometry::new([1.5, 2.5, 3.5], [16, 16, 16]).unwrap();
    let f = random_field(g, 5).into_spectral();
    let [n1, n2, n3] = g.sizes;
    let mut sum = 0.0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for i3 in 0..n3 {
                let k = [g.wavenumber(Axis::X1, i1), g.wavenumber(Axis::X2, i2), g.wavenumber(Axis::Y, i3)];
                let c = f.data()[g.flat_index(i1, i2, i3)];
                sum += (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * c.norm_sqr();
            }
        }
    }
    let expected = (sum * g.volume()).sqrt();
    assert!((f.h1dot() - expected).abs() < 1e-12 * expected);
}

#[test]
fn transform_round_trip_on_anisotropic_grid() {
    let g = TorusGeometry::new([1.0, 2.0, 3.0], [8, 12, 20]).unwrap();
    let f = random_field(g, 3);
    let back = f.spectral().physical();
    let diff = f.real_values().iter().zip(back.real_values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-14);
}

fn geometries() -> impl Strategy<Value = TorusGeometry> {
    (0.5f64..8.0, 0.5f64..8.0, 0.5f64..8.0, 2usize..6, 2usize..6, 2usize..6).prop_map(|(a, b, c, i, j, k)| {
        TorusGeometry::new([a, b, c], [2 * i, 2 * j, 2 * k]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_identity(g in geometries(), seed in any::<u64>()) {
        let f = random_field(g, seed);
        let zero = f.mean_over_x().to_field(g).unwrap();
        let fl = f.fluct();
        let mut sum = zero.spectral();
        sum.axpy(1.0, &fl).unwrap();
        let fv = f.real_values();
        let scale = f.linf();
        for (a, b) in sum.real_values().iter().zip(&fv) {
            prop_assert!((a - b).abs() < 1e-13 * scale);
        }
        let l2 = f.l2();
        prop_assert!(zero.inner(&fl).unwrap().abs() < 1e-12 * l2 * l2);
    }

    #[test]
    fn operations_keep_real_fields_real(g in geometries(), seed in any::<u64>()) {
        let f = random_field(g, seed).into_spectral();
        let mut ops = vec![f.laplacian(), f.dealiased(), f.fluct()];
        for axis in [Axis::X1, Axis::X2, Axis::Y] {
            ops.push(f.deriv(axis, 1).unwrap());
            ops.push(f.deriv(axis, 3).unwrap());
        }
        let mut mf = f.clone();
        mf.set_coeff([0, 0, 0], Complex64::default());
        ops.push(mf.invert_neg_laplacian().unwrap());
        for op in ops {
            prop_assert!(op.hermitian_defect() < 1e-12);
            prop_assert!(op.imaginary_residue() < 1e-12);
        }
    }

    #[test]
    fn parseval(g in geometries(), seed in any::<u64>()) {
        let f = random_field(g, seed);
        let phys = f.l2();
        let spec = f.spectral().l2();
        prop_assert!((phys - spec).abs() < 1e-12 * phys);
    }
}
