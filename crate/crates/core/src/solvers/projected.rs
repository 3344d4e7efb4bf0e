//! Residuals of the equations satisfied by the horizontal average `<phi>(y)`
//! and by `psi = d<phi>/dy`, evaluated on stored KSE snapshots:
//!
//! `d<phi>/dt + (nu/2) <|grad phi|^2> + nu d^4<phi>/dy^4 + nu d^2<phi>/dy^2 = 0`,
//! `dpsi/dt + (nu/2) d/dy <|grad phi_neq|^2> + nu psi dpsi/dy + nu d^4psi/dy^4 + nu d^2psi/dy^2 = 0`.
//!
//! Time derivatives are centered differences, so the residuals are
//! `O(stride^2)` on a converged run.

use serde::{Deserialize, Serialize};

use super::rhs_kse;
use crate::diagnostics::Trajectory;
use crate::error::{Error, Result};
use crate::spectral::{SpectralField3, ZeroMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedResidualReport {
    pub snapshot_times: Vec<f64>,
    /// Spatial mean of each snapshot.
    pub mean_history: Vec<f64>,
    /// Interior snapshot times at which residuals are evaluated.
    pub times: Vec<f64>,
    /// `L^2(0, L3)` norms of the zero-mode residual.
    pub zero_mode_residual: Vec<f64>,
    pub psi_residual: Vec<f64>,
    pub max_zero_mode_residual: f64,
    pub max_psi_residual: f64,
}

/// A snapshot's zero mode and `psi`, with the non-time-derivative terms of
/// both equations.
struct Projected {
    zero: ZeroMode,
    psi: ZeroMode,
    zero_terms: ZeroMode,
    psi_terms: ZeroMode,
}

fn project(phi: &SpectralField3, nu: f64) -> Result<Projected> {
    let zero = phi.mean_over_x();
    let psi = zero.deriv(1);
    // Without flow, rhs_kse is -(nu/2) dealias(|grad f|^2).
    let full = rhs_kse(None, phi, nu)?.mean_over_x();
    let fluct = rhs_kse(None, &phi.fluct(), nu)?.mean_over_x();
    let zero_terms = zero.deriv(4).add_scaled(1.0, &zero.deriv(2)).scaled(nu).sub(&full);
    let psi_terms = psi
        .deriv(4)
        .add_scaled(1.0, &psi.deriv(2))
        .scaled(nu)
        .add_scaled(nu, &psi.product_dealiased(&psi.deriv(1)))
        .sub(&fluct.deriv(1));
    Ok(Projected { zero, psi, zero_terms, psi_terms })
}

/// Evaluates both projected residuals at every interior snapshot of a KSE
/// trajectory whose snapshots are uniformly spaced in time.
pub fn verify_projected_kse(traj: &Trajectory, nu: f64) -> Result<ProjectedResidualReport> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 snapshots, have {}", snaps.len())));
    }
    let h = snaps[1].t - snaps[0].t;
    if snaps.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs().max(1.0)) || !(h > 0.0) {
        return Err(Error::InvalidInput("snapshots are not uniformly spaced".into()));
    }
    let projected: Vec<Projected> = snaps.iter().map(|s| project(&s.field, nu)).collect::<Result<_>>()?;
    let (mut times, mut rz, mut rp) = (Vec::new(), Vec::new(), Vec::new());
    for j in 1..snaps.len() - 1 {
        let (prev, cur, next) = (&projected[j - 1], &projected[j], &projected[j + 1]);
        let dz = next.zero.sub(&prev.zero).scaled(0.5 / h);
        let dp = next.psi.sub(&prev.psi).scaled(0.5 / h);
        times.push(snaps[j].t);
        rz.push(dz.add_scaled(1.0, &cur.zero_terms).l2());
        rp.push(dp.add_scaled(1.0, &cur.psi_terms).l2());
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(ProjectedResidualReport {
        snapshot_times: snaps.iter().map(|s| s.t).collect(),
        mean_history: snaps.iter().map(|s| s.field.mean()).collect(),
        times,
        max_zero_mode_residual: max(&rz),
        max_psi_residual: max(&rp),
        zero_mode_residual: rz,
        psi_residual: rp,
    })
}
