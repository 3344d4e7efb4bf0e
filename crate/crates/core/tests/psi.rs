use std::collections::BTreeMap;
use std::f64::consts::PI;

use helical::flows::ShearProfile;
use helical::psi::{build_matrix, psi, semigroup_norm, sigma_min, OperatorSpec, SearchOptions};
use helical::spectral::{ModePair, TorusGeometry};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(profile: ShearProfile, nu: f64, gamma: u32, k: (i64, i64), ny: usize) -> OperatorSpec {
    let g = TorusGeometry::cube(2.0 * PI, 8).unwrap();
    OperatorSpec { nu, gamma, k: ModePair::new(k.0, k.1), geometry: g, profile, ny }
}

/// Convolution of two sparse Fourier series.
fn convolve(a: &[(i64, Complex64)], b: &[(i64, Complex64)]) -> BTreeMap<i64, Complex64> {
    let mut out = BTreeMap::new();
    for &(i, x) in a {
        for &(j, y) in b {
            *out.entry(i + j).or_insert_with(Complex64::default) += x * y;
        }
    }
    out
}

#[test]
fn cosine_profile_couples_two_modes_apart_plus_a_constant() {
    let ny = 16;
    let (k1, k2) = (1.0, 1.0);
    let s = spec(ShearProfile::cosine(2.0 * PI), 1e-3, 1, (1, 1), ny);
    let a = build_matrix(&s).unwrap();
    // u = cos y and k1 sin y + k2 cos y as coefficient lists.
    let u = [(-1, Complex64::new(0.5, 0.0)), (1, Complex64::new(0.5, 0.0))];
    let trig = [(1, Complex64::new(0.5 * k2, -0.5 * k1)), (-1, Complex64::new(0.5 * k2, 0.5 * k1))];
    let g = convolve(&u, &trig);
    assert_eq!(g.keys().copied().collect::<Vec<_>>(), vec![-2, 0, 2]);
    assert!((g[&0] - Complex64::new(0.5 * k2, 0.0)).norm() < 1e-15);
    for i in 0..ny {
        for j in 0..ny {
            let m = i as i64 - ny as i64 / 2;
            let q = (j as i64 - ny as i64 / 2) as f64;
            let mut expect = Complex64::i() * g.get(&(i as i64 - j as i64)).copied().unwrap_or_default();
            if i == j {
                expect += 1e-3 * (k1 * k1 + k2 * k2 + q * q);
            }
            assert!((a[(i, j)] - expect).norm() < 1e-14, "entry ({i},{j}), mode {m}");
        }
    }
}

#[test]
fn sigma_min_matches_full_svd_on_random_64_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = DMatrix::from_fn(64, 64, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let oracle = a.clone().svd(false, false).singular_values.min();
    let got = sigma_min(&a).unwrap();
    assert!((got - oracle).abs() < 1e-8 * oracle, "{got} vs {oracle}");
}

#[test]
fn psi_ratio_over_two_decades_of_nu() {
    let search = SearchOptions::default();
    let one = ShearProfile::constant(1.0, 2.0 * PI);
    let a = psi(&spec(one.clone(), 1e-2, 1, (1, 0), 256), &search).unwrap();
    let b = psi(&spec(one, 1e-4, 1, (1, 0), 256), &search).unwrap();
    assert!(a.converged_in_ny && b.converged_in_ny);
    let beta = (b.value / a.value).ln() / (1e-2f64).ln();
    assert!((0.4..=0.6).contains(&beta), "local exponent {beta}");
}

#[test]
fn no_flow_reproduces_the_diffusion_floor() {
    let search = SearchOptions::default();
    for (gamma, k) in [(1, (1, 0)), (2, (2, 1)), (1, (0, 3))] {
        let s = spec(ShearProfile::constant(0.0, 2.0 * PI), 3e-3, gamma, k, 32);
        let e = psi(&s, &search).unwrap();
        let floor = s.diffusion_floor();
        assert!((e.value - floor).abs() < 1e-10 * floor, "{} vs {floor}", e.value);
    }
}

fn random_profile(seed: u64) -> ShearProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ShearProfile::sampled((0..6).map(|_| rng.gen_range(-1.5..1.5)).collect(), 2.0 * PI).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn psi_respects_accretivity_floor(seed in any::<u64>(), lognu in -3.0f64..-0.5, gamma in 1u32..3, n1 in 1i64..3, n2 in 0i64..2) {
        let s = spec(random_profile(seed), 10f64.powf(lognu), gamma, (n1, n2), 32);
        let e = psi(&s, &SearchOptions { check_doubling: false, ..SearchOptions::default() }).unwrap();
        prop_assert!(e.value >= s.diffusion_floor() * (1.0 - 1e-6));
    }

    #[test]
    fn semigroup_below_resolvent_bound(seed in any::<u64>(), lognu in -2.5f64..-0.5, tscale in 0.5f64..8.0) {
        let s = spec(random_profile(seed), 10f64.powf(lognu), 1, (1, 0), 32);
        let e = psi(&s, &SearchOptions { check_doubling: false, ..SearchOptions::default() }).unwrap();
        let t = tscale / e.value;
        let norm = semigroup_norm(&s, t).unwrap();
        prop_assert!(norm <= (-t * e.value + PI / 2.0).exp() * (1.0 + 1e-8), "{} at t = {}", norm, t);
    }
}
