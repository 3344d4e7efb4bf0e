//! The three model problems: advection-diffusion, the advective
//! Kuramoto-Sivashinsky equation and the advective parabolic-elliptic
//! Keller-Segel system, plus run-time monitors specific to them.

mod initial;
mod projected;
mod rhs;

pub use initial::{gaussian_bump, random_bandlimited, single_mode, InitialData};
pub use projected::{verify_projected_kse, ProjectedResidualReport};
pub use rhs::{active_columns, rhs_adv_diff, rhs_keller_segel, rhs_kse, AdvDiffRhs, KellerSegelRhs, KseRhs};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{HelicalFlow, ProfileShape, ShearProfile};
use crate::integrator::{ExplicitRhs, LinearSymbol, Observer, ObserverAction, Problem, StepPolicy};
use crate::spectral::{SpectralField3, TorusGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    AdvDiff,
    Kse,
    KellerSegel,
}

impl ProblemKind {
    pub fn tag(self) -> &'static str {
        match self {
            ProblemKind::AdvDiff => "adv_diff",
            ProblemKind::Kse => "kse",
            ProblemKind::KellerSegel => "keller_segel",
        }
    }
}

/// Initial densities may dip this far below zero (relative to the maximum).
pub const INITIAL_POSITIVITY_TOL: f64 = 1e-12;
/// Undershoots during a run beyond this fraction of the maximum are flagged.
pub const RUN_POSITIVITY_TOL: f64 = 1e-6;
/// Relative mass drift that counts as a conservation failure.
pub const MASS_DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub geometry: TorusGeometry,
    /// `None` means no flow.
    pub profile: Option<ProfileShape>,
    pub nu: f64,
    /// Order of the dissipation `(-Laplacian)^gamma`; advection-diffusion only.
    pub gamma: u32,
    pub initial: InitialData,
    pub seed: u64,
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub output_stride: usize,
}

impl ProblemConfig {
    pub fn new(kind: ProblemKind, geometry: TorusGeometry, nu: f64, initial: InitialData) -> Self {
        Self {
            kind,
            geometry,
            profile: None,
            nu,
            gamma: 1,
            initial,
            seed: 0,
            t_end: 1.0,
            dt_max: 0.1,
            cfl: 0.4,
            output_stride: 1,
        }
    }

    pub fn flow(&self) -> Result<Option<HelicalFlow>> {
        match &self.profile {
            None => Ok(None),
            Some(ProfileShape::Constant(a)) if *a == 0.0 => Ok(None),
            Some(shape) => {
                let profile = ShearProfile { shape: shape.clone(), period: self.geometry.lengths[2] };
                HelicalFlow::new(profile, self.geometry).map(Some)
            }
        }
    }

    pub fn policy(&self) -> StepPolicy {
        StepPolicy { dt_max: self.dt_max, cfl_number: self.cfl, t_end: self.t_end, output_stride: self.output_stride }
    }

    /// Checks parameters; returns warnings for configurations outside the
    /// regime where the KSE has no growing modes in `y`.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidInput(format!("nu must be positive, got {}", self.nu)));
        }
        if self.kind == ProblemKind::AdvDiff && !(self.gamma == 1 || self.gamma == 2) {
            return Err(Error::InvalidInput(format!("gamma must be 1 or 2, got {}", self.gamma)));
        }
        let mut warnings = Vec::new();
        if self.kind == ProblemKind::Kse && self.geometry.lengths[2] >= 2.0 * PI {
            warnings.push(format!(
                "L3 = {} >= 2 pi: the y-direction has growing KSE modes and the zero mode is not controlled",
                self.geometry.lengths[2]
            ));
        }
        Ok(warnings)
    }
}

/// The linear advection-diffusion problem with the same viscosity, flow,
/// grid and time stepping, started from `sin` of the single mode `n`. Its
/// fitted decay rate supplies `lambda_nu` to the bootstrap ledgers.
pub fn companion_linear(config: &ProblemConfig, n: [i64; 3]) -> ProblemConfig {
    ProblemConfig {
        kind: ProblemKind::AdvDiff,
        gamma: 1,
        initial: InitialData::SingleMode { n, amplitude: 1.0 },
        ..config.clone()
    }
}

/// A problem ready for `simulate`.
pub struct Setup {
    pub problem: Problem<'static>,
    pub policy: StepPolicy,
    pub warnings: Vec<String>,
    /// Keller-Segel only: the mean density held fixed in the Poisson equation.
    pub mean_density: Option<f64>,
}

pub fn build_problem(config: &ProblemConfig) -> Result<Setup> {
    let warnings = config.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let g = config.geometry;
    let flow = config.flow()?;
    let max_speed = flow.as_ref().map_or(0.0, HelicalFlow::max_speed);
    let initial = config.initial.build(g, config.seed)?;
    let mut mean_density = None;
    let (symbol, rhs): (LinearSymbol, Box<dyn ExplicitRhs>) = match config.kind {
        ProblemKind::AdvDiff => (
            LinearSymbol::adv_diff(g, config.nu, config.gamma),
            Box::new(AdvDiffRhs::new(flow).with_support_of(&initial)),
        ),
        ProblemKind::Kse => (LinearSymbol::kse(g, config.nu), Box::new(KseRhs::new(g, flow, config.nu))),
        ProblemKind::KellerSegel => {
            check_initial_positivity(&initial)?;
            let mean = initial.mean();
            mean_density = Some(mean);
            (LinearSymbol::keller_segel(g, config.nu), Box::new(KellerSegelRhs::new(g, flow, config.nu, mean)))
        }
    };
    Ok(Setup { problem: Problem { symbol, rhs, initial, max_speed }, policy: config.policy(), warnings, mean_density })
}

/// `min rho >= -1e-12 max rho`.
pub fn check_initial_positivity(rho: &SpectralField3) -> Result<()> {
    let v = rho.real_values();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -INITIAL_POSITIVITY_TOL * max.abs() {
        return Err(Error::InvalidInput(format!("initial density is negative (min {min:e}, max {max:e})")));
    }
    Ok(())
}

/// Records mass drift and negative undershoots of a density along a run.
/// Never stops the run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DensityMonitor {
    pub initial_mass: Option<f64>,
    pub max_mass_drift: f64,
    /// Most negative `min rho / max rho` seen.
    pub worst_undershoot: f64,
    pub first_undershoot_time: Option<f64>,
}

impl DensityMonitor {
    pub fn mass_conserved(&self) -> bool {
        self.max_mass_drift <= MASS_DRIFT_TOL
    }
}

impl Observer for DensityMonitor {
    fn observe(&mut self, t: f64, state: &SpectralField3) -> Result<ObserverAction> {
        let mean = state.mean();
        let m0 = *self.initial_mass.get_or_insert(mean);
        let drift = (mean - m0).abs() / m0.abs().max(f64::MIN_POSITIVE);
        self.max_mass_drift = self.max_mass_drift.max(drift);
        let v = state.real_values();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            let ratio = min / max;
            self.worst_undershoot = self.worst_undershoot.min(ratio);
            if ratio < -RUN_POSITIVITY_TOL && self.first_undershoot_time.is_none() {
                log::warn!("density undershoot {ratio:e} of the maximum at t = {t}");
                self.first_undershoot_time = Some(t);
            }
        }
        Ok(ObserverAction::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, RecordOptions};

    #[test]
    fn kse_warns_on_long_y_period() {
        let g = TorusGeometry::new([4.0, 4.0, 7.0], [8, 8, 8]).unwrap();
        let cfg = ProblemConfig::new(ProblemKind::Kse, g, 0.1, InitialData::Constant { value: 0.0 });
        assert_eq!(cfg.validate().unwrap().len(), 1);
        let g = TorusGeometry::new([4.0, 4.0, 5.0], [8, 8, 8]).unwrap();
        let cfg = ProblemConfig::new(ProblemKind::Kse, g, 0.1, InitialData::Constant { value: 0.0 });
        assert!(cfg.validate().unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = TorusGeometry::cube(1.0, 8).unwrap();
        let mut cfg = ProblemConfig::new(ProblemKind::AdvDiff, g, 0.1, InitialData::Constant { value: 0.0 });
        cfg.gamma = 3;
        assert!(cfg.validate().is_err());
        cfg.gamma = 1;
        cfg.nu = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn negative_initial_density_is_rejected() {
        let g = TorusGeometry::cube(2.0 * PI, 8).unwrap();
        let cfg = ProblemConfig::new(
            ProblemKind::KellerSegel,
            g,
            1.0,
            InitialData::SingleMode { n: [1, 0, 0], amplitude: 1.0 },
        );
        assert!(build_problem(&cfg).is_err());
    }

    #[test]
    fn constant_density_stays_constant() {
        let g = TorusGeometry::cube(2.0 * PI, 8).unwrap();
        let mut cfg = ProblemConfig::new(ProblemKind::KellerSegel, g, 1.0, InitialData::Constant { value: 2.0 });
        cfg.profile = Some(ProfileShape::Cosine);
        let setup = build_problem(&cfg).unwrap();
        assert_eq!(setup.mean_density, Some(2.0));
        let mut mon = DensityMonitor::default();
        let traj = simulate(setup.problem, &setup.policy, &RecordOptions::default(), &mut [&mut mon]).unwrap();
        assert!(traj.series("l2_fluct").unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(mon.max_mass_drift, 0.0);
    }
}
