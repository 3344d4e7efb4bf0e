//! Integrating-factor RK4 time stepping for equations `d f/dt = sigma f + N(f)`
//! whose linear part `sigma` is diagonal in Fourier space.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, CheckpointWriter, CHECKPOINT_VERSION};

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{BlowupCriterion, SeriesRecorder, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{Representation, SpectralField3, TorusGeometry};

/// Coefficients above this modulus count as overflow.
pub const OVERFLOW_THRESHOLD: f64 = 1e30;

/// Per-mode growth rates `sigma(k)` in the spectral layout of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSymbol {
    geometry: TorusGeometry,
    values: Vec<f64>,
}

impl LinearSymbol {
    /// `sigma = f(|k|^2)` on every mode.
    pub fn from_fn<F: Fn(f64) -> f64>(geometry: TorusGeometry, f: F) -> Self {
        let [kx1, kx2, ky] = geometry.wavenumbers();
        let mut values = Vec::with_capacity(geometry.len());
        for a in &kx1 {
            for b in &kx2 {
                for c in &ky {
                    values.push(f(a * a + b * b + c * c));
                }
            }
        }
        Self { geometry, values }
    }

    pub fn zero(geometry: TorusGeometry) -> Self {
        Self { geometry, values: vec![0.0; geometry.len()] }
    }

    /// `-nu |k|^(2 gamma)`.
    pub fn adv_diff(geometry: TorusGeometry, nu: f64, gamma: u32) -> Self {
        Self::from_fn(geometry, |k2| -nu * k2.powi(gamma as i32))
    }

    /// `nu |k|^2 (1 - |k|^2)`, from `-nu Laplacian^2 - nu Laplacian`.
    pub fn kse(geometry: TorusGeometry, nu: f64) -> Self {
        Self::from_fn(geometry, |k2| nu * k2 * (1.0 - k2))
    }

    /// `-nu |k|^2`.
    pub fn keller_segel(geometry: TorusGeometry, nu: f64) -> Self {
        Self::from_fn(geometry, |k2| -nu * k2)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }
}

/// The explicitly treated terms `N(f)`.
pub trait ExplicitRhs {
    /// Writes `N(state)` into `out`. When `support` is `Some`, only those
    /// columns need to be written; the rest of `out` stays zero.
    fn eval(&mut self, state: &SpectralField3, out: &mut SpectralField3) -> Result<()>;

    /// `(n1, n2)` columns (flat indices `i1 * N2 + i2`) outside which both the
    /// state and `N` are known to vanish, closed under `(n1, n2) -> (-n1, -n2)`.
    fn support(&self) -> Option<Vec<usize>> {
        None
    }
}

/// `N = 0`.
pub struct ZeroRhs;

impl ExplicitRhs for ZeroRhs {
    fn eval(&mut self, _state: &SpectralField3, out: &mut SpectralField3) -> Result<()> {
        out.data_mut().fill(Complex64::default());
        Ok(())
    }
}

/// Adapts a closure returning a new field.
pub struct FnRhs<F>(pub F);

impl<F: FnMut(&SpectralField3) -> Result<SpectralField3>> ExplicitRhs for FnRhs<F> {
    fn eval(&mut self, state: &SpectralField3, out: &mut SpectralField3) -> Result<()> {
        let r = (self.0)(state)?.into_spectral();
        state.geometry().ensure_same(r.geometry())?;
        out.data_mut().copy_from_slice(r.data());
        Ok(())
    }
}

/// Step size control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub dt_max: f64,
    pub cfl_number: f64,
    pub t_end: f64,
    /// Steps between recorded outputs.
    pub output_stride: usize,
}

impl StepPolicy {
    pub fn new(t_end: f64, dt_max: f64) -> Self {
        Self { dt_max, cfl_number: 0.4, t_end, output_stride: 1 }
    }

    /// Uniform step `dt <= min(dt_max, cfl dx_min / max_speed)` dividing
    /// `t_end` exactly, and the number of steps.
    pub fn step_size(&self, geometry: &TorusGeometry, max_speed: f64) -> Result<(f64, usize)> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.dt_max > 0.0) || !(self.cfl_number > 0.0) || self.output_stride == 0 {
            return Err(Error::InvalidInput("dt_max, cfl and output_stride must be positive".into()));
        }
        let mut dt = self.dt_max;
        if max_speed > 0.0 {
            dt = dt.min(self.cfl_number * geometry.min_spacing() / max_speed);
        }
        if self.t_end == 0.0 {
            return Ok((dt, 0));
        }
        let n = (self.t_end / dt).ceil().max(1.0) as usize;
        Ok((self.t_end / n as f64, n))
    }
}

fn column_ranges(geometry: &TorusGeometry, support: Option<&[usize]>) -> Vec<Range<usize>> {
    let n3 = geometry.sizes[2];
    match support {
        None => vec![0..geometry.len()],
        Some(cols) => {
            let mut sorted = cols.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            let mut out: Vec<Range<usize>> = Vec::new();
            for c in sorted {
                let r = c * n3..(c + 1) * n3;
                match out.last_mut() {
                    Some(last) if last.end == r.start => last.end = r.end,
                    _ => out.push(r),
                }
            }
            out
        }
    }
}

/// One integrating-factor RK4 stepper for a fixed `dt`, with the
/// exponentials `e^{sigma dt/2}` and `e^{sigma dt}` cached.
pub struct IfRk4 {
    dt: f64,
    half: Vec<f64>,
    full: Vec<f64>,
    ranges: Vec<Range<usize>>,
    support: Option<Vec<usize>>,
    stages: [SpectralField3; 5],
}

impl IfRk4 {
    pub fn new(symbol: &LinearSymbol, dt: f64, support: Option<Vec<usize>>) -> Self {
        let half: Vec<f64> = symbol.values.iter().map(|s| (s * dt / 2.0).exp()).collect();
        let full: Vec<f64> = half.iter().map(|e| e * e).collect();
        let g = symbol.geometry;
        let z = || SpectralField3::zeros(g, Representation::Spectral);
        Self {
            dt,
            half,
            full,
            ranges: column_ranges(&g, support.as_deref()),
            support,
            stages: [z(), z(), z(), z(), z()],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Applies `f(i)` to every index in the active columns.
    fn for_active<F: Fn(usize, &mut Complex64) + Sync>(ranges: &[Range<usize>], data: &mut [Complex64], f: F) {
        for r in ranges {
            let start = r.start;
            data[r.clone()].par_iter_mut().enumerate().with_min_len(4096).for_each(|(j, v)| f(start + j, v));
        }
    }

    /// Advances `state` by one step in place.
    ///
    /// `u1 = E(u + h a)`, `u2 = E u + h b`, `u3 = E2 u + dt E c`,
    /// `u_new = E2 u + dt/6 (E2 a + 2 E (b + c) + d)` with `E = e^{sigma dt/2}`,
    /// `E2 = E^2`, `h = dt/2` and `a..d` the explicit terms at the stages.
    pub fn step(&mut self, state: &mut SpectralField3, rhs: &mut dyn ExplicitRhs) -> Result<()> {
        if !state.is_spectral() {
            return Err(Error::Contract("time stepping needs a spectral state".into()));
        }
        let (dt, h) = (self.dt, self.dt / 2.0);
        let (half, full) = (&self.half, &self.full);
        let ranges = &self.ranges;
        let [a, b, c, d, tmp] = &mut self.stages;

        rhs.eval(state, a)?;
        {
            let (u, av) = (state.data(), a.data());
            Self::for_active(ranges, tmp.data_mut(), |i, v| *v = half[i] * (u[i] + h * av[i]));
        }
        rhs.eval(tmp, b)?;
        {
            let (u, bv) = (state.data(), b.data());
            Self::for_active(ranges, tmp.data_mut(), |i, v| *v = half[i] * u[i] + h * bv[i]);
        }
        rhs.eval(tmp, c)?;
        {
            let (u, cv) = (state.data(), c.data());
            Self::for_active(ranges, tmp.data_mut(), |i, v| *v = full[i] * u[i] + dt * half[i] * cv[i]);
        }
        rhs.eval(tmp, d)?;
        {
            let (av, bv, cv, dv) = (a.data(), b.data(), c.data(), d.data());
            Self::for_active(ranges, state.data_mut(), |i, v| {
                *v = full[i] * *v + dt / 6.0 * (full[i] * av[i] + 2.0 * half[i] * (bv[i] + cv[i]) + dv[i]);
            });
        }
        state.symmetrize_columns(self.support.as_deref());
        Ok(())
    }

    /// Largest coefficient modulus on the active columns, `None` if some
    /// coefficient is not finite.
    fn max_abs(&self, state: &SpectralField3) -> Option<f64> {
        let data = state.data();
        let mut m = 0.0f64;
        for r in &self.ranges {
            for v in &data[r.clone()] {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return None;
                }
                m = m.max(v.norm_sqr());
            }
        }
        Some(m.sqrt())
    }
}

/// One integrating-factor RK4 step of `d f/dt = sigma f + N(f)`.
pub fn if_rk4_step(
    state: &SpectralField3,
    symbol: &LinearSymbol,
    rhs: &mut dyn ExplicitRhs,
    dt: f64,
) -> Result<SpectralField3> {
    let mut stepper = IfRk4::new(symbol, dt, rhs.support());
    let mut out = state.spectral();
    stepper.step(&mut out, rhs)?;
    match stepper.max_abs(&out) {
        Some(m) if m <= OVERFLOW_THRESHOLD => Ok(out),
        _ => Err(Error::Overflow { t_last: 0.0 }),
    }
}

/// How a simulation ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupSuspected { t: f64, criterion: BlowupCriterion },
    Stopped { t: f64, reason: String },
    Overflow { t_last: f64 },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowupSuspected { .. } => "blowup_suspected",
            Termination::Stopped { .. } => "stopped",
            Termination::Overflow { .. } => "overflow",
        }
    }
}

pub enum ObserverAction {
    Continue,
    Stop(Termination),
}

/// Called at every output time with a snapshot of the spectral state.
pub trait Observer {
    fn observe(&mut self, t: f64, state: &SpectralField3) -> Result<ObserverAction>;
}

pub struct Problem<'a> {
    pub symbol: LinearSymbol,
    pub rhs: Box<dyn ExplicitRhs + 'a>,
    pub initial: SpectralField3,
    /// `sup |v|`, used by the CFL condition.
    pub max_speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RecordOptions {
    /// Store the full spectral state every this many outputs (0 disables).
    pub snapshot_every: usize,
}

/// A run that stopped on an error, with everything recorded up to then.
#[derive(Debug)]
pub struct Interrupted {
    pub trajectory: Trajectory,
    pub cause: Error,
}

impl std::fmt::Display for Interrupted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run interrupted at t = {}: {}", self.trajectory.times.last().copied().unwrap_or(0.0), self.cause)
    }
}

impl std::error::Error for Interrupted {}

/// Advances `problem` to `policy.t_end`, recording the scalar series (and
/// snapshots if requested) every `output_stride` steps and at the final time.
pub fn simulate(
    problem: Problem<'_>,
    policy: &StepPolicy,
    record: &RecordOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory, Interrupted> {
    let Problem { symbol, mut rhs, initial, max_speed } = problem;
    let geometry = *initial.geometry();
    let mut recorder = SeriesRecorder::new(geometry, record.snapshot_every);
    let fail = |recorder: SeriesRecorder, status: Termination, cause: Error| Interrupted {
        trajectory: recorder.finish(status),
        cause,
    };
    if !symbol.geometry.same_as(&geometry) {
        let e = Error::GeometryMismatch("linear symbol and initial data live on different grids".into());
        return Err(fail(recorder, Termination::Stopped { t: 0.0, reason: e.to_string() }, e));
    }
    let mut state = initial.spectral();
    if state.hermitian_defect() > 1e-10 {
        let e = Error::Contract("initial data must be real".into());
        return Err(fail(recorder, Termination::Stopped { t: 0.0, reason: e.to_string() }, e));
    }
    let (dt, nsteps) = match policy.step_size(&geometry, max_speed) {
        Ok(v) => v,
        Err(e) => return Err(fail(recorder, Termination::Stopped { t: 0.0, reason: e.to_string() }, e)),
    };
    log::info!("simulate: dt = {dt:.6e}, {nsteps} steps to t = {}", policy.t_end);
    let mut stepper = IfRk4::new(&symbol, dt, rhs.support());
    state.symmetrize_columns(stepper.support.as_deref());

    let mut emit = |t: f64, state: &SpectralField3, recorder: &mut SeriesRecorder| -> Result<Option<Termination>> {
        recorder.record(t, state);
        for obs in observers.iter_mut() {
            if let ObserverAction::Stop(term) = obs.observe(t, state)? {
                return Ok(Some(term));
            }
        }
        Ok(None)
    };

    match emit(0.0, &state, &mut recorder) {
        Ok(Some(term)) => return Ok(recorder.finish(term)),
        Ok(None) => {}
        Err(e) => return Err(fail(recorder, Termination::Stopped { t: 0.0, reason: e.to_string() }, e)),
    }
    for step in 1..=nsteps {
        let t_prev = (step - 1) as f64 * dt;
        if let Err(e) = stepper.step(&mut state, rhs.as_mut()) {
            return Err(fail(recorder, Termination::Stopped { t: t_prev, reason: e.to_string() }, e));
        }
        match stepper.max_abs(&state) {
            Some(m) if m <= OVERFLOW_THRESHOLD => {}
            _ => {
                let e = Error::Overflow { t_last: t_prev };
                return Err(fail(recorder, Termination::Overflow { t_last: t_prev }, e));
            }
        }
        if step % policy.output_stride == 0 || step == nsteps {
            let t = if step == nsteps { policy.t_end } else { step as f64 * dt };
            match emit(t, &state, &mut recorder) {
                Ok(Some(term)) => return Ok(recorder.finish(term)),
                Ok(None) => {}
                Err(e) => return Err(fail(recorder, Termination::Stopped { t, reason: e.to_string() }, e)),
            }
        }
    }
    let mut traj = recorder.finish(Termination::Completed);
    traj.final_state = Some(state);
    traj.dt = Some(dt);
    Ok(traj)
}
