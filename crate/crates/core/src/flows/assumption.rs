//! Grid-based check of the non-degeneracy condition on `u`: for every level
//! `lambda`, phase `alpha` and radius `delta`, the set where
//! `|u(y) sin(2 pi y/L3 + alpha) - lambda| < c1 (delta/L3)^m` must be covered
//! by at most `n_max` intervals of radius `delta`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ShearProfile;
use crate::error::{Error, Result};

/// Sample grids for the `(lambda, alpha, delta)` scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionGrids {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Number of points of the fine `y` grid the sublevel sets are taken on.
    pub fine_points: usize,
}

impl AssumptionGrids {
    /// 401 levels on `[-sup|u|-1, sup|u|+1]`, 64 phases on `[0, 2 pi)`,
    /// 16 log-spaced radii on `[L3/1024, L3/8]` and a 4096-point `y` grid.
    pub fn default_for(profile: &ShearProfile) -> Self {
        let umax = profile.max_abs();
        let l3 = profile.period;
        Self {
            lambdas: linspace(-umax - 1.0, umax + 1.0, 401),
            alphas: (0..64).map(|i| 2.0 * PI * i as f64 / 64.0).collect(),
            deltas: logspace(l3 / 1024.0, l3 / 8.0, 16),
            fine_points: 4096,
        }
    }

    fn validate(&self, l3: f64) -> Result<()> {
        if self.lambdas.is_empty() || self.alphas.is_empty() || self.deltas.is_empty() || self.fine_points == 0 {
            return Err(Error::InvalidInput("assumption check needs nonempty sample grids".into()));
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d < l3)) {
            return Err(Error::InvalidInput(format!("delta sample {d} outside (0, L3)")));
        }
        Ok(())
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub(crate) fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Intervals needed divided by `n_max`; above 1 means failure.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub m: u32,
    pub c1_trial: f64,
    /// Largest `c1` in `[c1_trial/10, 10 c1_trial]` that passes, if any.
    pub c1_estimate: Option<f64>,
    pub worst_case: WorstCase,
    pub n_points_max: usize,
    /// Largest interval count seen at `c1_trial`.
    pub max_intervals: usize,
    pub pass: bool,
    pub profile: String,
    pub grids: GridSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n_lambda: usize,
    pub lambda_range: [f64; 2],
    pub n_alpha: usize,
    pub n_delta: usize,
    pub delta_range: [f64; 2],
    pub fine_points: usize,
}

/// Number of half-open windows `[p, p + 2 delta)` needed to cover the marked
/// points of a periodic grid, placing each window at the leftmost uncovered
/// point and starting after the widest gap.
fn greedy_cover(marked: &[usize], n: usize, spacing: f64, delta: f64) -> usize {
    if marked.is_empty() {
        return 0;
    }
    let period = n as f64 * spacing;
    if marked.len() == n {
        return (period / (2.0 * delta)).ceil() as usize;
    }
    // Start right after the widest gap between consecutive marked points.
    let mut start = 0;
    let mut widest = 0;
    for (idx, &j) in marked.iter().enumerate() {
        let prev = if idx == 0 { marked[marked.len() - 1] } else { marked[idx - 1] };
        let gap = (j + n - prev) % n;
        let gap = if gap == 0 { n } else { gap };
        if gap > widest {
            widest = gap;
            start = idx;
        }
    }
    let origin = marked[start];
    let mut count = 0;
    let mut covered_until = f64::NEG_INFINITY;
    for step in 0..marked.len() {
        let j = marked[(start + step) % marked.len()];
        let pos = ((j + n - origin) % n) as f64 * spacing;
        if pos >= covered_until {
            count += 1;
            covered_until = pos + 2.0 * delta;
        }
    }
    count
}

struct Scan {
    max_count: usize,
    worst: (f64, f64, f64),
}

fn scan(profile: &ShearProfile, m: u32, grids: &AssumptionGrids, c1: f64, u: &[f64]) -> Scan {
    let n = grids.fine_points;
    let l3 = profile.period;
    let spacing = l3 / n as f64;
    let delta_max = grids.deltas.iter().cloned().fold(0.0, f64::max);
    let tau_max = c1 * (delta_max / l3).powi(m as i32);

    let per_alpha: Vec<(usize, (f64, f64, f64))> = grids
        .alphas
        .par_iter()
        .map(|&alpha| {
            let f: Vec<f64> = (0..n)
                .map(|j| u[j] * (2.0 * PI * j as f64 / n as f64 + alpha).sin())
                .collect();
            let mut best = (0usize, (f64::NAN, alpha, f64::NAN));
            let mut candidates: Vec<(usize, f64)> = Vec::new();
            let mut marked: Vec<usize> = Vec::new();
            for &lambda in &grids.lambdas {
                candidates.clear();
                candidates.extend(
                    f.iter().enumerate().map(|(j, v)| (j, (v - lambda).abs())).filter(|&(_, d)| d < tau_max),
                );
                for &delta in &grids.deltas {
                    let tau = c1 * (delta / l3).powi(m as i32);
                    marked.clear();
                    marked.extend(candidates.iter().filter(|&&(_, d)| d < tau).map(|&(j, _)| j));
                    let count = greedy_cover(&marked, n, spacing, delta);
                    if count > best.0 || best.1 .0.is_nan() {
                        best = (count, (lambda, alpha, delta));
                    }
                }
            }
            best
        })
        .collect();

    // Fixed-order reduction keeps the reported worst case deterministic.
    let mut out = Scan { max_count: 0, worst: (f64::NAN, f64::NAN, f64::NAN) };
    for (count, w) in per_alpha {
        if count > out.max_count || out.worst.0.is_nan() {
            out.max_count = count;
            out.worst = w;
        }
    }
    out
}

/// Scans the sample grids at `c1_trial` and estimates the largest passing
/// `c1` by log-scale bisection over `[c1_trial/10, 10 c1_trial]`.
pub fn check_assumption(
    profile: &ShearProfile,
    m: u32,
    grids: &AssumptionGrids,
    c1_trial: f64,
    n_max: usize,
) -> Result<AssumptionReport> {
    grids.validate(profile.period)?;
    if !(c1_trial > 0.0) {
        return Err(Error::InvalidInput(format!("c1 must be positive, got {c1_trial}")));
    }
    let u = profile.samples(grids.fine_points);
    let at_trial = scan(profile, m, grids, c1_trial, &u);
    let pass = at_trial.max_count <= n_max;

    let passes = |c1: f64| scan(profile, m, grids, c1, &u).max_count <= n_max;
    let (lo, hi) = (c1_trial / 10.0, c1_trial * 10.0);
    let c1_estimate = if passes(hi) {
        Some(hi)
    } else if !pass && !passes(lo) {
        None
    } else {
        let (mut good, mut bad) = if pass { (c1_trial, hi) } else { (lo, c1_trial) };
        for _ in 0..12 {
            let mid = (good * bad).sqrt();
            if passes(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Some(good)
    };

    let (lambda, alpha, delta) = at_trial.worst;
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().cloned().fold(init, f);
    Ok(AssumptionReport {
        m,
        c1_trial,
        c1_estimate,
        worst_case: WorstCase { lambda, alpha, delta, ratio: at_trial.max_count as f64 / n_max as f64 },
        n_points_max: n_max,
        max_intervals: at_trial.max_count,
        pass,
        profile: profile.to_string(),
        grids: GridSummary {
            n_lambda: grids.lambdas.len(),
            lambda_range: [fold(&grids.lambdas, f64::min, f64::INFINITY), fold(&grids.lambdas, f64::max, f64::NEG_INFINITY)],
            n_alpha: grids.alphas.len(),
            n_delta: grids.deltas.len(),
            delta_range: [fold(&grids.deltas, f64::min, f64::INFINITY), fold(&grids.deltas, f64::max, f64::NEG_INFINITY)],
            fine_points: grids.fine_points,
        },
    })
}
