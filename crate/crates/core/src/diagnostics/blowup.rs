use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrator::{Observer, ObserverAction, Termination, OVERFLOW_THRESHOLD};
use crate::spectral::{mode_index, SpectralField3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupThresholds {
    pub linf: f64,
    /// Largest tolerated fraction of the non-mean energy in the outer shell.
    pub shell_fraction: f64,
}

impl Default for BlowupThresholds {
    fn default() -> Self {
        Self { linf: 1e6, shell_fraction: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum BlowupCriterion {
    Linf { value: f64, threshold: f64 },
    /// Energy is piling up at the smallest resolved scales.
    Resolution { fraction: f64, threshold: f64 },
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BlowupStatus {
    Ok,
    Suspected { criterion: BlowupCriterion },
}

/// Flags a state as a suspected singularity when `||f||_inf` exceeds
/// `thresholds.linf`, when more than `thresholds.shell_fraction` of the
/// energy outside the mean sits in the outer shell, or when a coefficient is
/// not finite or beyond the overflow threshold.
///
/// The outer shell is every mode with `|n_a| > 2 N_a / 9` on some axis: the
/// top third of the band kept by 2/3 dealiasing, plus the truncated modes.
pub fn blowup_monitor(state: &SpectralField3, thresholds: &BlowupThresholds) -> BlowupStatus {
    let s = state.spectral();
    match s.max_abs_finite() {
        Some(m) if m <= OVERFLOW_THRESHOLD => {}
        _ => return BlowupStatus::Suspected { criterion: BlowupCriterion::Overflow },
    }
    let linf = s.linf();
    if linf > thresholds.linf {
        return BlowupStatus::Suspected { criterion: BlowupCriterion::Linf { value: linf, threshold: thresholds.linf } };
    }
    let g = s.geometry();
    let sizes = g.sizes;
    let cut = g.dealias_band().map(|b| 2 * b / 3);
    let outer = |i: usize, a: usize| mode_index(i, sizes[a]).unsigned_abs() as usize > cut[a];
    let [_, n2, n3] = sizes;
    let (mut total, mut shell) = (0.0, 0.0);
    for (col, line) in s.data().chunks(n3).enumerate() {
        let col_outer = outer(col / n2, 0) || outer(col % n2, 1);
        for (i3, c) in line.iter().enumerate() {
            if col == 0 && i3 == 0 {
                continue;
            }
            let e = c.norm_sqr();
            total += e;
            if col_outer || outer(i3, 2) {
                shell += e;
            }
        }
    }
    if total > 0.0 {
        let fraction = shell / total;
        if fraction > thresholds.shell_fraction {
            return BlowupStatus::Suspected {
                criterion: BlowupCriterion::Resolution { fraction, threshold: thresholds.shell_fraction },
            };
        }
    }
    BlowupStatus::Ok
}

/// Observer that stops a run at the first suspected blow-up.
#[derive(Clone, Debug, Default)]
pub struct BlowupMonitor {
    pub thresholds: BlowupThresholds,
    pub flagged: Option<(f64, BlowupCriterion)>,
}

impl BlowupMonitor {
    pub fn new(thresholds: BlowupThresholds) -> Self {
        Self { thresholds, flagged: None }
    }
}

impl Observer for BlowupMonitor {
    fn observe(&mut self, t: f64, state: &SpectralField3) -> Result<ObserverAction> {
        match blowup_monitor(state, &self.thresholds) {
            BlowupStatus::Ok => Ok(ObserverAction::Continue),
            BlowupStatus::Suspected { criterion } => {
                self.flagged = Some((t, criterion));
                Ok(ObserverAction::Stop(Termination::BlowupSuspected { t, criterion }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Representation, TorusGeometry};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn smooth_field_is_ok() {
        let g = TorusGeometry::cube(2.0 * PI, 16).unwrap();
        let f = SpectralField3::from_fn(g, |x, z, y| 3.0 + x.sin() * y.cos() + (2.0 * z).cos());
        assert_eq!(blowup_monitor(&f, &BlowupThresholds::default()), BlowupStatus::Ok);
    }

    #[test]
    fn nyquist_energy_is_a_resolution_failure() {
        let g = TorusGeometry::cube(2.0 * PI, 16).unwrap();
        let mut f = SpectralField3::zeros(g, Representation::Spectral);
        f.set_coeff([-8, 0, 0], Complex64::new(1.0, 0.0));
        f.set_coeff([0, 0, 0], Complex64::new(5.0, 0.0));
        match blowup_monitor(&f, &BlowupThresholds::default()) {
            BlowupStatus::Suspected { criterion: BlowupCriterion::Resolution { fraction, .. } } => {
                assert!((fraction - 1.0).abs() < 1e-15)
            }
            s => panic!("unexpected {s:?}"),
        }
    }

    #[test]
    fn large_values_and_overflow() {
        let g = TorusGeometry::cube(1.0, 8).unwrap();
        let big = SpectralField3::constant(g, 2e6);
        assert!(matches!(
            blowup_monitor(&big, &BlowupThresholds::default()),
            BlowupStatus::Suspected { criterion: BlowupCriterion::Linf { .. } }
        ));
        let mut bad = SpectralField3::zeros(g, Representation::Spectral);
        bad.set_coeff([1, 0, 0], Complex64::new(f64::NAN, 0.0));
        assert_eq!(
            blowup_monitor(&bad, &BlowupThresholds::default()),
            BlowupStatus::Suspected { criterion: BlowupCriterion::Overflow }
        );
    }
}
