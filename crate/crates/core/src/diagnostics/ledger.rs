//! Empirical checks of the bootstrap inequalities along recorded trajectories.
//!
//! Margins are `ln(bound / value)`: positive when an inequality holds with
//! room to spare, `None` when the value is exactly zero (infinite margin).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

pub const DEFAULT_CALIBRATION_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Kse,
    KellerSegel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerItem {
    pub name: String,
    pub constant: f64,
    /// Number of (s, t) pairs or times at which the inequality was evaluated.
    pub checks: usize,
    pub satisfied_fraction: f64,
    pub worst_margin: Option<f64>,
    pub worst_time: Option<f64>,
    /// Restart time of the worst pair, for two-time inequalities.
    pub worst_s: Option<f64>,
}

/// `||psi(t)||^2 + nu int_0^t ||d^2 psi/dy^2||^2` and its running maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeBound {
    pub quantity: Vec<f64>,
    pub running_max: Vec<f64>,
    /// Final running maximum, the empirical constant of the zero-mode bound.
    pub c1: f64,
}

/// Constants measured on the calibration window `[t0, t_cal]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t_cal: f64,
    pub c_l2: f64,
    pub c_h1: f64,
    pub c_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapLedger {
    pub kind: LedgerKind,
    pub lambda_nu_used: f64,
    pub nu: f64,
    pub items: Vec<LedgerItem>,
    pub zero_mode: Option<ZeroModeBound>,
    pub calibration: Option<Calibration>,
}

impl BootstrapLedger {
    pub fn item(&self, name: &str) -> Option<&LedgerItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn all_satisfied(&self) -> bool {
        self.items.iter().all(|i| i.satisfied_fraction == 1.0)
    }
}

/// Running tally for one inequality.
#[derive(Clone, Copy, Default)]
struct Tally {
    checks: usize,
    ok: usize,
    /// (margin, t, s) of the tightest check with finite margin.
    worst: Option<(f64, f64, Option<f64>)>,
}

impl Tally {
    fn add(&mut self, value: f64, bound: f64, t: f64, s: Option<f64>) {
        self.checks += 1;
        if value <= bound {
            self.ok += 1;
        }
        if value > 0.0 {
            // A positive value against a zero bound is the most negative finite margin.
            let m = if bound > 0.0 { (bound / value).ln() } else { f64::MIN };
            if self.worst.map_or(true, |(w, _, _)| m < w) {
                self.worst = Some((m, t, s));
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checks += other.checks;
        self.ok += other.ok;
        if let Some((m, _, _)) = other.worst {
            if self.worst.map_or(true, |(w, _, _)| m < w) {
                self.worst = other.worst;
            }
        }
        self
    }

    fn item(self, name: &str, constant: f64) -> LedgerItem {
        LedgerItem {
            name: name.to_string(),
            constant,
            checks: self.checks,
            satisfied_fraction: if self.checks == 0 { 1.0 } else { self.ok as f64 / self.checks as f64 },
            worst_margin: self.worst.map(|w| w.0),
            worst_time: self.worst.map(|w| w.1),
            worst_s: self.worst.and_then(|w| w.2),
        }
    }
}

/// `int_{t_0}^{t_j} g` by the trapezoid rule, for every `j`.
pub fn trapezoid_cumulative(times: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for j in 0..times.len() {
        if j > 0 {
            acc += 0.5 * (times[j] - times[j - 1]) * (g[j] + g[j - 1]);
        }
        out.push(acc);
    }
    out
}

/// The first output time plus `count - 1` log-spaced restart times between
/// the second output time and half the final time.
pub fn default_s_grid(times: &[f64], count: usize) -> Vec<f64> {
    let Some(&t0) = times.first() else { return Vec::new() };
    let mut out = vec![t0];
    if times.len() < 2 || count < 2 {
        return out;
    }
    let lo = times[1];
    let hi = (0.5 * times[times.len() - 1]).max(lo);
    if lo <= 0.0 {
        return out;
    }
    let m = count - 1;
    for i in 0..m {
        let f = if m == 1 { 0.0 } else { i as f64 / (m - 1) as f64 };
        out.push(lo * (hi / lo).powf(f));
    }
    out
}

/// Index of the output time closest to `s`.
fn nearest_index(times: &[f64], s: f64) -> usize {
    let i = times.partition_point(|&t| t < s);
    if i == 0 {
        0
    } else if i >= times.len() {
        times.len() - 1
    } else if (times[i] - s).abs() < (s - times[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}

fn check_rates(nu: f64, lambda_nu: f64) -> Result<()> {
    if !(lambda_nu > 0.0 && lambda_nu.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda_nu must be positive, got {lambda_nu}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidInput(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

/// Checks the decay and dissipation inequalities of the fluctuation part of a
/// KSE run, restarting at every time in `s_grid` (snapped to the output grid):
///
/// `||phi_neq(t)|| <= C e^{-lambda (t-s)/4} ||phi_neq(s)||` with C = 8 (H1), 4 (B1);
/// `nu int_s^t ||Laplacian phi_neq||^2 <= C ||phi_neq(s)||^2` with C = 4 (H2), 2 (B2).
pub fn check_bootstrap_kse(traj: &Trajectory, nu: f64, lambda_nu: f64, s_grid: &[f64]) -> Result<BootstrapLedger> {
    check_rates(nu, lambda_nu)?;
    let times = &traj.times;
    let l2 = traj.series("l2_fluct")?;
    let h2 = traj.series("h2_fluct")?;
    let l2_psi = traj.series("l2_psi")?;
    let h2_psi = traj.series("h2_psi")?;
    if times.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }

    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let diss = trapezoid_cumulative(times, &sq(h2));
    let mut starts: Vec<usize> = s_grid.iter().map(|&s| nearest_index(times, s)).collect();
    starts.sort_unstable();
    starts.dedup();

    let per_start: Vec<[Tally; 4]> = starts
        .par_iter()
        .map(|&i| {
            let mut t = [Tally::default(); 4];
            let s = times[i];
            for j in i + 1..times.len() {
                let decay = (-lambda_nu * (times[j] - s) / 4.0).exp() * l2[i];
                let integral = nu * (diss[j] - diss[i]);
                let e0 = l2[i] * l2[i];
                t[0].add(l2[j], 8.0 * decay, times[j], Some(s));
                t[1].add(integral, 4.0 * e0, times[j], Some(s));
                t[2].add(l2[j], 4.0 * decay, times[j], Some(s));
                t[3].add(integral, 2.0 * e0, times[j], Some(s));
            }
            t
        })
        .collect();
    let total = per_start.into_iter().fold([Tally::default(); 4], |acc, t| {
        [acc[0].merge(t[0]), acc[1].merge(t[1]), acc[2].merge(t[2]), acc[3].merge(t[3])]
    });

    let psi_diss = trapezoid_cumulative(times, &sq(h2_psi));
    let quantity: Vec<f64> = l2_psi.iter().zip(&psi_diss).map(|(p, d)| p * p + nu * d).collect();
    let mut running_max = Vec::with_capacity(quantity.len());
    let mut m = f64::NEG_INFINITY;
    for &q in &quantity {
        m = m.max(q);
        running_max.push(m);
    }

    Ok(BootstrapLedger {
        kind: LedgerKind::Kse,
        lambda_nu_used: lambda_nu,
        nu,
        items: vec![
            total[0].item("H1", 8.0),
            total[1].item("H2", 4.0),
            total[2].item("B1", 4.0),
            total[3].item("B2", 2.0),
        ],
        zero_mode: Some(ZeroModeBound { c1: m, quantity, running_max }),
        calibration: None,
    })
}

/// Checks the Keller-Segel bootstrap items along a run:
///
/// - A-1/B-1: `nu int_s^t ||grad rho_neq||^2 <= C e^{-lambda s/4} ||rho_0||^2`, C = 128/64, all pairs `s < t`;
/// - A-2/B-2: `||rho_neq(t)||^2 <= C e^{-lambda t/4} ||rho_0||^2`, C = 32/16;
/// - A-3..A-5 / B-3..B-5: `||<rho> - mean||`, `||d<rho>/dy||` and `||rho||_inf`
///   stay below 4C / 2C, where each C is the supremum over the first
///   `calibration_fraction` of the run and the bound is checked on the rest.
pub fn check_bootstrap_ks(
    traj: &Trajectory,
    nu: f64,
    lambda_nu: f64,
    calibration_fraction: f64,
) -> Result<BootstrapLedger> {
    check_rates(nu, lambda_nu)?;
    if !(0.0..1.0).contains(&calibration_fraction) {
        return Err(Error::InvalidInput(format!("calibration fraction {calibration_fraction} not in [0, 1)")));
    }
    let times = &traj.times;
    let l2_fluct = traj.series("l2_fluct")?;
    let h1_fluct = traj.series("h1_fluct")?;
    let l2_zero = traj.series("l2_zero")?;
    let l2_psi = traj.series("l2_psi")?;
    let linf = traj.series("linf")?;
    let l2 = traj.series("l2")?;
    if times.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let e0 = l2[0] * l2[0];
    let t0 = times[0];

    let grad: Vec<f64> = h1_fluct.iter().map(|x| x * x).collect();
    let diss = trapezoid_cumulative(times, &grad);
    let pair_tallies: Vec<[Tally; 2]> = (0..times.len())
        .into_par_iter()
        .map(|i| {
            let mut t = [Tally::default(); 2];
            let s = times[i];
            let base = (-lambda_nu * (s - t0) / 4.0).exp() * e0;
            for j in i + 1..times.len() {
                let v = nu * (diss[j] - diss[i]);
                t[0].add(v, 128.0 * base, times[j], Some(s));
                t[1].add(v, 64.0 * base, times[j], Some(s));
            }
            t
        })
        .collect();
    let [a1, b1] = pair_tallies
        .into_iter()
        .fold([Tally::default(); 2], |acc, t| [acc[0].merge(t[0]), acc[1].merge(t[1])]);

    let (mut a2, mut b2) = (Tally::default(), Tally::default());
    for (j, &t) in times.iter().enumerate() {
        let v = l2_fluct[j] * l2_fluct[j];
        let base = (-lambda_nu * (t - t0) / 4.0).exp() * e0;
        a2.add(v, 32.0 * base, t, None);
        b2.add(v, 16.0 * base, t, None);
    }

    let t_cal = t0 + calibration_fraction * (times[times.len() - 1] - t0);
    let n_cal = times.partition_point(|&t| t <= t_cal).max(1);
    let sup = |v: &[f64]| v[..n_cal].iter().copied().fold(0.0, f64::max);
    let cal = Calibration { t_cal, c_l2: sup(l2_zero), c_h1: sup(l2_psi), c_inf: sup(linf) };
    let persist = |series: &[f64], c: f64, factor: f64| {
        let mut tally = Tally::default();
        for j in n_cal..times.len() {
            tally.add(series[j], factor * c, times[j], None);
        }
        tally
    };
    let items = vec![
        a1.item("A-1", 128.0),
        a2.item("A-2", 32.0),
        persist(l2_zero, cal.c_l2, 4.0).item("A-3", 4.0),
        persist(l2_psi, cal.c_h1, 4.0).item("A-4", 4.0),
        persist(linf, cal.c_inf, 4.0).item("A-5", 4.0),
        b1.item("B-1", 64.0),
        b2.item("B-2", 16.0),
        persist(l2_zero, cal.c_l2, 2.0).item("B-3", 2.0),
        persist(l2_psi, cal.c_h1, 2.0).item("B-4", 2.0),
        persist(linf, cal.c_inf, 2.0).item("B-5", 2.0),
    ];
    Ok(BootstrapLedger {
        kind: LedgerKind::KellerSegel,
        lambda_nu_used: lambda_nu,
        nu,
        items,
        zero_mode: None,
        calibration: Some(cal),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGeometry;

    fn traj(times: Vec<f64>, cols: &[(&str, Vec<f64>)]) -> Trajectory {
        let g = TorusGeometry::cube(1.0, 4).unwrap();
        Trajectory::from_series(g, times, cols.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()).unwrap()
    }

    #[test]
    fn trapezoid_is_exact_for_linear_integrands() {
        let t = vec![0.0, 0.5, 1.5, 2.0];
        let g: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        let c = trapezoid_cumulative(&t, &g);
        for (ti, ci) in t.iter().zip(c) {
            assert!((ci - (1.5 * ti * ti + ti)).abs() < 1e-14);
        }
    }

    #[test]
    fn s_grid_shape() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        let s = default_s_grid(&t, 16);
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.1).abs() < 1e-15 && (s[15] - 50.0).abs() < 1e-9);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn kse_items_on_an_exact_exponential() {
        // ||phi_neq|| = e^{-t}, ||Laplacian phi_neq|| = 2 e^{-t}: with lambda = 1 the decay
        // items hold with margins ln 8 and ln 4 at t = s.
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let l2: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let h2: Vec<f64> = l2.iter().map(|v| 2.0 * v).collect();
        let z = vec![0.0; t.len()];
        let tr = traj(t.clone(), &[("l2_fluct", l2), ("h2_fluct", h2), ("l2_psi", z.clone()), ("h2_psi", z)]);
        let led = check_bootstrap_kse(&tr, 0.1, 1.0, &default_s_grid(&t, 16)).unwrap();
        assert!(led.all_satisfied());
        let h1 = led.item("H1").unwrap();
        let b1 = led.item("B1").unwrap();
        assert!((h1.worst_margin.unwrap() - 8f64.ln() - 0.75 * 0.05).abs() < 1e-12);
        assert!((h1.worst_margin.unwrap() - b1.worst_margin.unwrap() - 2f64.ln()).abs() < 1e-12);
        // nu int_s^t 4 e^{-2 tau} <= 0.2 e^{-2 s} < 2 e^{-2 s}.
        assert!(led.item("B2").unwrap().worst_margin.unwrap() > 2.0f64.ln());
        assert_eq!(led.zero_mode.as_ref().unwrap().c1, 0.0);
    }

    #[test]
    fn zero_fluctuation_gives_infinite_margins() {
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let z = vec![0.0; 20];
        let psi: Vec<f64> = (0..20).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let tr = traj(
            t.clone(),
            &[("l2_fluct", z.clone()), ("h2_fluct", z.clone()), ("l2_psi", psi.clone()), ("h2_psi", psi)],
        );
        let led = check_bootstrap_kse(&tr, 0.5, 0.1, &default_s_grid(&t, 16)).unwrap();
        assert!(led.all_satisfied());
        assert!(led.items.iter().all(|i| i.worst_margin.is_none()));
        let zm = led.zero_mode.unwrap();
        assert!(zm.running_max.windows(2).all(|w| w[1] >= w[0]));
        assert!(check_bootstrap_kse(&tr, 0.5, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn ks_calibration_and_persistence() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let n = t.len();
        let z = vec![0.0; n];
        // linf grows 5x after calibration: fails both the 4C and 2C bounds.
        let linf: Vec<f64> = t.iter().map(|&t| if t < 5.0 { 1.0 } else { 5.0 }).collect();
        let l2 = vec![1.0; n];
        let tr = traj(
            t,
            &[
                ("l2_fluct", z.clone()),
                ("h1_fluct", z.clone()),
                ("l2_zero", z.clone()),
                ("l2_psi", z),
                ("linf", linf),
                ("l2", l2),
            ],
        );
        let led = check_bootstrap_ks(&tr, 1.0, 1.0, 0.1).unwrap();
        let cal = led.calibration.unwrap();
        assert!((cal.t_cal - 1.0).abs() < 1e-12 && cal.c_inf == 1.0);
        assert_eq!(led.item("A-3").unwrap().satisfied_fraction, 1.0);
        let a5 = led.item("A-5").unwrap();
        assert!(a5.satisfied_fraction < 1.0);
        assert!((a5.worst_time.unwrap() - 5.0).abs() < 1e-12);
        assert!((a5.worst_margin.unwrap() - (4.0f64 / 5.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn ks_requires_zero_mode_series() {
        let tr = traj(vec![0.0, 1.0], &[("l2_fluct", vec![1.0, 1.0])]);
        assert!(matches!(check_bootstrap_ks(&tr, 1.0, 1.0, 0.1), Err(Error::MissingSeries(_))));
    }
}
