use std::f64::consts::PI;

use helical::flows::{HelicalFlow, ProfileShape, ShearProfile};
use helical::integrator::{simulate, LinearSymbol, Problem, RecordOptions, StepPolicy, ZeroRhs};
use helical::solvers::{
    build_problem, random_bandlimited, rhs_adv_diff, single_mode, verify_projected_kse, AdvDiffRhs, DensityMonitor,
    InitialData, KellerSegelRhs, ProblemConfig, ProblemKind,
};
use helical::spectral::{SpectralField3, TorusGeometry};
use proptest::prelude::*;

#[test]
fn advection_rhs_is_orthogonal_to_the_state() {
    let g = TorusGeometry::new([3.0, 4.0, 2.0 * PI], [24, 24, 24]).unwrap();
    let theta = random_bandlimited(g, 7, 1.0, 12).unwrap();
    let flow = HelicalFlow::new(ShearProfile::cosine(2.0 * PI), g).unwrap();
    let r = rhs_adv_diff(Some(&flow), &theta).unwrap();
    assert!(r.inner(&theta).unwrap().abs() < 1e-10 * theta.l2().powi(2));
}

fn growth_rate(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len() - 1;
    (values[n] / values[0]).ln() / (times[n] - times[0])
}

#[test]
fn kse_small_mode_grows_at_the_linear_rate() {
    let l1 = 8.0;
    let g = TorusGeometry::new([l1, 4.0, 4.0], [16, 8, 8]).unwrap();
    let nu = 0.1;
    let mut cfg = ProblemConfig::new(ProblemKind::Kse, g, nu, InitialData::SingleMode { n: [1, 0, 0], amplitude: 1e-8 });
    cfg.t_end = 5.0;
    cfg.dt_max = 0.05;
    let setup = build_problem(&cfg).unwrap();
    let traj = simulate(setup.problem, &setup.policy, &RecordOptions::default(), &mut []).unwrap();
    let k = 2.0 * PI / l1;
    let expected = nu * k * k * (1.0 - k * k);
    assert!(expected > 0.0);
    let rate = growth_rate(&traj.times, traj.series("l2_fluct").unwrap());
    assert!((rate - expected).abs() < 0.01 * expected, "{rate} vs {expected}");
}

/// `rho = mean + eps sin(k x1)` without flow grows like `e^{nu (mean - k^2) t}`;
/// the rate is cross-checked with a forward difference of the solver output.
#[test]
fn keller_segel_small_mode_grows_at_the_linear_rate() {
    let g = TorusGeometry::new([2.0 * PI, 4.0, 4.0], [16, 8, 8]).unwrap();
    let (nu, mean, eps) = (1.0, 2.0, 1e-8);
    let mut rho = single_mode(g, [1, 0, 0], eps);
    rho.set_coeff([0, 0, 0], rho.coeff([0, 0, 0]) + mean);
    let run = |t_end: f64, dt: f64| {
        let problem = Problem {
            symbol: LinearSymbol::keller_segel(g, nu),
            rhs: Box::new(KellerSegelRhs::new(g, None, nu, mean)),
            initial: rho.clone(),
            max_speed: 0.0,
        };
        simulate(problem, &StepPolicy::new(t_end, dt), &RecordOptions::default(), &mut []).unwrap()
    };
    let expected = nu * (mean - 1.0);
    let traj = run(2.0, 0.01);
    let rate = growth_rate(&traj.times, traj.series("l2_fluct").unwrap());
    assert!((rate - expected).abs() < 0.01 * expected, "{rate} vs {expected}");
    let short = run(1e-4, 1e-4);
    let f = short.series("l2_fluct").unwrap();
    let fd = (f[1] - f[0]) / (f[0] * 1e-4);
    assert!((fd - expected).abs() < 0.01 * expected, "{fd} vs {expected}");
}

#[test]
fn projected_residuals_are_second_order_in_the_stride() {
    let g = TorusGeometry::new([4.0 * PI, 4.0 * PI, 5.0], [16, 16, 16]).unwrap();
    let nu = 0.1;
    let residuals: Vec<_> = [4, 8]
        .iter()
        .map(|&every| {
            let mut cfg = ProblemConfig::new(
                ProblemKind::Kse,
                g,
                nu,
                InitialData::RandomBandlimited { band: 2, amplitude: 3.0, seed: Some(1) },
            );
            cfg.profile = Some(ProfileShape::Constant(1.0));
            cfg.t_end = 1.0;
            cfg.dt_max = 0.005;
            let setup = build_problem(&cfg).unwrap();
            let traj = simulate(setup.problem, &setup.policy, &RecordOptions { snapshot_every: every }, &mut []).unwrap();
            verify_projected_kse(&traj, nu).unwrap()
        })
        .collect();
    let (fine, coarse) = (&residuals[0], &residuals[1]);
    for (i, t) in coarse.times.iter().enumerate() {
        let j = fine.times.iter().position(|s| (s - t).abs() < 1e-9).unwrap();
        let rz = coarse.zero_mode_residual[i] / fine.zero_mode_residual[j];
        let rp = coarse.psi_residual[i] / fine.psi_residual[j];
        assert!((3.5..=4.5).contains(&rz) && (3.5..=4.5).contains(&rp), "t {t}: {rz}, {rp}");
    }
}

fn column_energies(f: &SpectralField3) -> Vec<f64> {
    let n3 = f.geometry().sizes[2];
    f.spectral().data().chunks(n3).map(|c| c.iter().map(|v| v.norm_sqr()).sum()).collect()
}

#[test]
fn columns_do_not_exchange_energy() {
    let g = TorusGeometry::new([3.0, 4.0, 2.0 * PI], [8, 8, 16]).unwrap();
    let theta = random_bandlimited(g, 2, 1.0, 5).unwrap();
    let flow = HelicalFlow::new(ShearProfile::cosine(2.0 * PI), g).unwrap();
    let e0 = column_energies(&theta);
    // Advection alone: energy per column is invariant up to the RK4 error.
    let problem = Problem {
        symbol: LinearSymbol::zero(g),
        rhs: Box::new(AdvDiffRhs::new(Some(flow.clone()))),
        initial: theta.clone(),
        max_speed: flow.max_speed(),
    };
    let traj = simulate(problem, &StepPolicy::new(1.0, 0.01), &RecordOptions::default(), &mut []).unwrap();
    let e1 = column_energies(traj.final_state.as_ref().unwrap());
    let total: f64 = e0.iter().sum();
    for (a, b) in e0.iter().zip(&e1) {
        assert!((a - b).abs() < 1e-8 * total, "{a} vs {b}");
    }
    // With diffusion each column's energy is nonincreasing.
    let problem = Problem {
        symbol: LinearSymbol::adv_diff(g, 0.05, 1),
        rhs: Box::new(AdvDiffRhs::new(Some(flow.clone()))),
        initial: theta.clone(),
        max_speed: flow.max_speed(),
    };
    let traj =
        simulate(problem, &StepPolicy::new(1.0, 0.01), &RecordOptions { snapshot_every: 1 }, &mut []).unwrap();
    let energies: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| column_energies(&s.field)).collect();
    for w in energies.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            assert!(*b <= a * (1.0 + 1e-12) + 1e-300);
        }
    }
}

#[test]
fn pure_diffusion_matches_heat_kernel() {
    let g = TorusGeometry::cube(2.0 * PI, 8).unwrap();
    let theta = single_mode(g, [2, 1, 0], 1.0);
    let problem =
        Problem { symbol: LinearSymbol::adv_diff(g, 0.1, 1), rhs: Box::new(ZeroRhs), initial: theta, max_speed: 0.0 };
    let traj = simulate(problem, &StepPolicy::new(3.0, 0.5), &RecordOptions::default(), &mut []).unwrap();
    let l2 = traj.series("l2").unwrap();
    let expected = l2[0] * (-0.1 * 5.0 * 3.0f64).exp();
    assert!((l2[l2.len() - 1] - expected).abs() < 1e-12 * expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn keller_segel_conserves_mass(seed in any::<u64>(), mean in 0.5f64..3.0, cosine in any::<bool>()) {
        let g = TorusGeometry::cube(2.0 * PI, 8).unwrap();
        let mut rho = random_bandlimited(g, 2, 0.1 * mean, seed).unwrap();
        rho.set_coeff([0, 0, 0], rho.coeff([0, 0, 0]) + mean);
        let flow = HelicalFlow::new(
            if cosine { ShearProfile::cosine(2.0 * PI) } else { ShearProfile::constant(1.0, 2.0 * PI) },
            g,
        ).unwrap();
        let problem = Problem {
            symbol: LinearSymbol::keller_segel(g, 0.5),
            max_speed: flow.max_speed(),
            rhs: Box::new(KellerSegelRhs::new(g, Some(flow), 0.5, mean)),
            initial: rho,
        };
        let mut mon = DensityMonitor::default();
        simulate(problem, &StepPolicy::new(1.0, 0.02), &RecordOptions::default(), &mut [&mut mon]).unwrap();
        prop_assert!(mon.max_mass_drift < 1e-10, "drift {}", mon.max_mass_drift);
    }

    #[test]
    fn kse_mean_is_nonincreasing(seed in any::<u64>(), amplitude in 0.5f64..3.0) {
        let g = TorusGeometry::new([4.0 * PI, 4.0 * PI, 5.0], [8, 8, 8]).unwrap();
        let mut cfg = ProblemConfig::new(
            ProblemKind::Kse,
            g,
            0.05,
            InitialData::RandomBandlimited { band: 2, amplitude, seed: Some(seed) },
        );
        cfg.profile = Some(ProfileShape::Cosine);
        cfg.t_end = 2.0;
        cfg.dt_max = 0.05;
        let setup = build_problem(&cfg).unwrap();
        let traj = simulate(setup.problem, &setup.policy, &RecordOptions::default(), &mut []).unwrap();
        let mean = traj.series("mass").unwrap();
        for w in mean.windows(2) {
            prop_assert!(w[1] - w[0] <= 1e-10, "mean rose by {}", w[1] - w[0]);
        }
    }

    #[test]
    fn short_y_period_has_no_growing_y_modes(l3 in 0.3f64..(2.0 * PI - 1e-9), half in 2usize..64, nu in 1e-4f64..1.0) {
        let g = TorusGeometry::new([1.0, 1.0, l3], [4, 4, 2 * half]).unwrap();
        let symbol = LinearSymbol::kse(g, nu);
        for i3 in 1..2 * half {
            prop_assert!(symbol.values()[i3] <= 0.0);
        }
    }
}
