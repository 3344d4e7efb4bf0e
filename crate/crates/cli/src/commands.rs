use std::path::{Path, PathBuf};

use helical::diagnostics::{
    check_bootstrap_ks, check_bootstrap_kse, default_s_grid, fit_decay_rate, BlowupMonitor, DecayFit, Snapshot,
    Trajectory, DEFAULT_CALIBRATION_FRACTION,
};
use helical::flows::{check_assumption, AssumptionGrids};
use helical::integrator::{
    read_checkpoint, simulate as run_solver, write_checkpoint, CheckpointHeader, CheckpointWriter, Observer,
    RecordOptions, Termination, CHECKPOINT_VERSION,
};
use helical::psi::{fit_scaling, psi, OperatorSpec, PsiEstimate, SearchOptions};
use helical::solvers::{build_problem, companion_linear, verify_projected_kse, DensityMonitor, InitialData, ProblemKind};
use helical::spectral::ModePair;
use helical::{Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{CheckSection, LoadedConfig};
use crate::manifest::{read_manifest, ManifestBuilder, RunManifest};
use crate::plot::{Plot, Scale, Series};

/// Options shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
    pub plot: bool,
}

fn with_seed(cfg: &LoadedConfig, opts: &RunOptions) -> LoadedConfig {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.config.seed = Some(s);
    }
    cfg
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-`nu` estimates of `Psi`, each in its own run directory, and the fitted
/// power law `Psi ~ C nu^beta`.
pub fn sweep_psi(cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = with_seed(cfg, opts);
    let sweep = cfg.sweep();
    let nus = cfg.sweep_nus()?;
    let geometry = cfg.geometry()?;
    let gamma = sweep.gamma.or(cfg.config.gamma).unwrap_or(1);
    let k = sweep.k.unwrap_or([1, 0]);
    let template = OperatorSpec {
        nu: nus[0],
        gamma,
        k: ModePair::new(k[0], k[1]),
        geometry,
        profile: cfg.shear_profile()?,
        ny: sweep.ny.unwrap_or(256),
    };
    template.validate().map_err(|e| cfg.error("sweep", e.to_string()))?;
    let search = SearchOptions {
        coarse_points: sweep.coarse_points.unwrap_or(SearchOptions::default().coarse_points),
        check_doubling: sweep.check_doubling.unwrap_or(true),
        ..SearchOptions::default()
    };

    let mut mb = ManifestBuilder::start("sweep-psi", &cfg.config, cfg.seed(), &opts.out)?;
    mb.manifest_mut().geometry = Some(geometry);
    let runs: Vec<(PathBuf, Result<PsiEstimate>)> = nus
        .par_iter()
        .enumerate()
        .map(|(i, &nu)| {
            let name = PathBuf::from("runs").join(format!("nu_{i:03}"));
            let dir = opts.out.join(&name);
            let run = || -> Result<PsiEstimate> {
                let mut sub = ManifestBuilder::start("sweep-psi/estimate", &cfg.config, cfg.seed(), &dir)?;
                let est = psi(&template.with_nu(nu), &search);
                match &est {
                    Ok(e) => {
                        write_json(&sub.output("estimate.json"), e)?;
                        if !e.converged_in_ny {
                            sub.manifest_mut().status = "not_converged".into();
                        }
                    }
                    Err(err) => sub.manifest_mut().status = format!("failed: {err}"),
                }
                sub.manifest_mut().details = json!({ "nu": nu });
                sub.finish()?;
                est
            };
            (name, run())
        })
        .collect();
    let mut estimates = Vec::with_capacity(runs.len());
    for (name, r) in runs {
        estimates.push(r?);
        mb.output(name.join("estimate.json"));
    }

    let path = mb.output("psi_sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
    w.write_record(["nu", "psi", "lambda_star", "ny", "converged_in_ny", "psi_doubled", "outside_hypothesis", "diffusion_floor"])
        .map_err(csv_error)?;
    for e in &estimates {
        let floor = template.with_nu(e.nu).diffusion_floor();
        w.write_record([
            num(e.nu),
            num(e.value),
            num(e.lambda_star),
            e.ny.to_string(),
            u8::from(e.converged_in_ny).to_string(),
            num(e.value_doubled.unwrap_or(f64::NAN)),
            u8::from(e.outside_hypothesis).to_string(),
            num(floor),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;

    if opts.plot {
        let x: Vec<f64> = estimates.iter().map(|e| e.nu).collect();
        let y: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        Plot {
            title: "Psi against nu",
            x_label: "nu",
            y_label: "Psi",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![Series { label: "Psi", x: &x, y: &y, markers: true }],
        }
        .write(&mb.output("psi_vs_nu.svg"))?;
    }

    match fit_scaling(estimates) {
        Ok(fit) => {
            write_json(&mb.output("scaling.json"), &fit)?;
            mb.manifest_mut().details =
                json!({ "beta": fit.beta, "r2": fit.r2, "prefactor": fit.prefactor, "gamma": gamma, "k": k });
            mb.finish()
        }
        Err(e) => {
            mb.manifest_mut().status = "failed".into();
            mb.manifest_mut().details = json!({ "error": e.to_string() });
            mb.finish()?;
            Err(e)
        }
    }
}

fn write_snapshots(dir: &Path, sub: &str, snaps: &[Snapshot], dt: f64, problem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.join(sub))?;
    let mut names = Vec::with_capacity(snaps.len());
    for (i, s) in snaps.iter().enumerate() {
        let name = Path::new(sub).join(format!("snapshot_{i:05}.bin"));
        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            geometry: *s.field.geometry(),
            time: s.t,
            dt,
            problem: problem.to_string(),
        };
        write_checkpoint(&dir.join(&name), &header, &s.field)?;
        names.push(name);
    }
    Ok(names)
}

/// Runs the configured problem, writing `series.csv`, checkpoints, stored
/// snapshots and the manifest.
pub fn simulate(cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = with_seed(cfg, opts);
    let problem = cfg.problem()?;
    let setup = build_problem(&problem)?;
    let geometry = problem.geometry;
    let (dt, nsteps) = setup.policy.step_size(&geometry, setup.problem.max_speed)?;

    let mut mb = ManifestBuilder::start("simulate", &cfg.config, cfg.seed(), &opts.out)?;
    mb.manifest_mut().geometry = Some(geometry);
    mb.manifest_mut().warnings = setup.warnings.clone();

    let tag = problem.kind.tag();
    let checkpoint_every = cfg.config.checkpoint_every.unwrap_or(100);
    let mut checkpoints = (checkpoint_every > 0).then(|| {
        let dir = opts.out.join("checkpoints");
        CheckpointWriter::new(dir, checkpoint_every, dt, tag)
    });
    if let Some(c) = &checkpoints {
        std::fs::create_dir_all(&c.dir)?;
    }
    let mut blowup = BlowupMonitor::default();
    let mut density = DensityMonitor::default();
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if problem.kind != ProblemKind::AdvDiff {
        observers.push(&mut blowup);
    }
    if problem.kind == ProblemKind::KellerSegel {
        observers.push(&mut density);
    }
    if let Some(c) = checkpoints.as_mut() {
        observers.push(c);
    }
    let record = RecordOptions { snapshot_every: cfg.config.snapshot_every.unwrap_or(0) };
    let (traj, cause) = match run_solver(setup.problem, &setup.policy, &record, &mut observers) {
        Ok(t) => (t, None),
        Err(i) => (i.trajectory, Some(i.cause)),
    };
    drop(observers);

    traj.write_csv(&mb.output("series.csv"))?;
    if let Some(c) = &checkpoints {
        for p in &c.written {
            mb.output(p.strip_prefix(&opts.out).unwrap_or(p));
        }
        if let Some(state) = &traj.final_state {
            let header = CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                geometry,
                time: problem.t_end,
                dt,
                problem: tag.to_string(),
            };
            write_checkpoint(&mb.output("checkpoints/final.bin"), &header, state)?;
        }
    }
    if !traj.snapshots.is_empty() {
        for name in write_snapshots(&opts.out, "snapshots", &traj.snapshots, dt, tag)? {
            mb.output(name);
        }
    }

    let mut details = json!({
        "kind": tag,
        "dt": dt,
        "steps": nsteps,
        "outputs": traj.len(),
        "t_last": traj.times.last().copied().unwrap_or(0.0),
    });
    if problem.kind == ProblemKind::KellerSegel {
        details["mean_density"] = json!(setup.mean_density);
        details["max_mass_drift"] = json!(density.max_mass_drift);
        details["mass_conserved"] = json!(density.mass_conserved());
        details["worst_undershoot"] = json!(density.worst_undershoot);
        details["first_undershoot_time"] = json!(density.first_undershoot_time);
        if let Some(t) = density.first_undershoot_time {
            mb.manifest_mut().warnings.push(format!("density undershoot beyond tolerance from t = {t}"));
        }
    }
    if problem.kind == ProblemKind::Kse {
        let mean = traj.series("mass")?;
        let rise = mean.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        details["max_mean_increase"] = json!(rise.is_finite().then_some(rise));
    }
    mb.manifest_mut().details = details;

    if opts.plot {
        let column = if problem.kind == ProblemKind::KellerSegel { "l2" } else { "l2_fluct" };
        let y = traj.series(column)?;
        Plot {
            title: &format!("{column} against time ({tag})"),
            x_label: "t",
            y_label: column,
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series: vec![Series { label: column, x: &traj.times, y, markers: false }],
        }
        .write(&mb.output("decay.svg"))?;
    }

    mb.manifest_mut().status = traj.status.label().to_string();
    mb.manifest_mut().termination = Some(traj.status.clone());
    let manifest = mb.finish()?;
    match cause {
        Some(e) if !matches!(traj.status, Termination::Overflow { .. }) => Err(e),
        _ => Ok(manifest),
    }
}

/// Where `lambda_nu` came from.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LambdaSource {
    pub lambda_nu: f64,
    pub source: String,
    pub fit: Option<DecayFit>,
}

fn lambda_from_file(path: &Path) -> Result<f64> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ["lambda_fit", "lambda_nu"]
        .iter()
        .find_map(|k| v.get(k).and_then(serde_json::Value::as_f64))
        .ok_or_else(|| Error::InvalidInput(format!("{} has no lambda_fit or lambda_nu field", path.display())))
}

/// Decay rate of the companion linear run; also writes its series into `dir`.
pub fn companion_rate(cfg: &LoadedConfig, section: &CheckSection, dir: &Path) -> Result<(DecayFit, PathBuf)> {
    // The companion replaces the initial data, so the check config need not carry any.
    let mut cfg = cfg.clone();
    cfg.config.initial.get_or_insert(InitialData::Constant { value: 0.0 });
    let mut base = cfg.problem()?;
    if let Some(t) = section.companion_t_end {
        base.t_end = t;
    }
    let lin = companion_linear(&base, section.companion_mode.unwrap_or([1, 0, 0]));
    let setup = build_problem(&lin)?;
    let traj = run_solver(setup.problem, &setup.policy, &RecordOptions::default(), &mut []).map_err(|i| i.cause)?;
    let window = section.companion_window.unwrap_or([0.25 * lin.t_end, lin.t_end]);
    let fit = fit_decay_rate(&traj.times, traj.series("l2_fluct")?, window)?;
    let path = dir.join("companion_series.csv");
    traj.write_csv(&path)?;
    Ok((fit, path))
}

/// Evaluates the bootstrap ledger on a stored trajectory.
pub fn check(cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = with_seed(cfg, opts);
    let section = cfg.check();
    let geometry = cfg.geometry()?;
    let nu = cfg.nu()?;
    let kind = cfg.config.kind.ok_or_else(|| cfg.error("kind", "missing (adv_diff, kse or keller_segel)"))?;
    let traj_path = section
        .trajectory
        .as_ref()
        .map(|p| cfg.resolve_path(p))
        .ok_or_else(|| cfg.error("check.trajectory", "missing path of the series CSV"))?;
    let run_dir = traj_path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Ok(m) = read_manifest(&run_dir) {
        if let Some(g) = m.geometry {
            if !g.same_as(&geometry) {
                return Err(Error::GeometryMismatch(format!(
                    "trajectory was run on {:?} x {:?}, config has {:?} x {:?}",
                    g.lengths, g.sizes, geometry.lengths, geometry.sizes
                )));
            }
        }
    }
    let traj = Trajectory::read_csv(&traj_path, geometry)?;

    let mut mb = ManifestBuilder::start("check", &cfg.config, cfg.seed(), &opts.out)?;
    mb.manifest_mut().geometry = Some(geometry);
    let lambda = match (section.lambda_nu, &section.lambda_file) {
        (Some(v), _) => LambdaSource { lambda_nu: v, source: "config".into(), fit: None },
        (None, Some(p)) => {
            let p = cfg.resolve_path(p);
            LambdaSource { lambda_nu: lambda_from_file(&p)?, source: p.display().to_string(), fit: None }
        }
        (None, None) => {
            let (fit, _) = companion_rate(&cfg, &section, &opts.out)?;
            mb.output("companion_series.csv");
            LambdaSource { lambda_nu: fit.lambda_fit, source: "companion linear run".into(), fit: Some(fit) }
        }
    };
    let ledger = match kind {
        ProblemKind::KellerSegel => check_bootstrap_ks(
            &traj,
            nu,
            lambda.lambda_nu,
            section.calibration_fraction.unwrap_or(DEFAULT_CALIBRATION_FRACTION),
        )?,
        ProblemKind::Kse | ProblemKind::AdvDiff => {
            let grid = default_s_grid(&traj.times, section.s_grid_points.unwrap_or(16));
            check_bootstrap_kse(&traj, nu, lambda.lambda_nu, &grid)?
        }
    };
    write_json(&mb.output("ledger.json"), &ledger)?;

    let mut details = json!({
        "lambda": lambda,
        "items": ledger.items.iter().map(|i| json!({
            "name": i.name, "satisfied_fraction": i.satisfied_fraction, "worst_margin": i.worst_margin,
        })).collect::<Vec<_>>(),
    });
    // Stored KSE snapshots also allow checking the projected equations.
    let snap_dir = run_dir.join("snapshots");
    if kind == ProblemKind::Kse && snap_dir.is_dir() {
        let mut traj = traj;
        traj.snapshots = read_snapshots(&snap_dir)?;
        if traj.snapshots.len() >= 3 {
            let report = verify_projected_kse(&traj, nu)?;
            details["max_zero_mode_residual"] = json!(report.max_zero_mode_residual);
            details["max_psi_residual"] = json!(report.max_psi_residual);
            write_json(&mb.output("projected_residuals.json"), &report)?;
        }
    }
    mb.manifest_mut().details = details;
    mb.manifest_mut().status = if ledger.all_satisfied() { "passed" } else { "failed" }.into();
    mb.finish()
}

fn read_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| read_checkpoint(p).map(|c| Snapshot { t: c.header.time, field: c.field }))
        .collect()
}

/// Samples the non-degeneracy condition on the configured profile.
pub fn check_assumption_cmd(cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = with_seed(cfg, opts);
    let profile = cfg.shear_profile()?;
    let section = cfg.assumption();
    let m = section.m.unwrap_or(2);
    let c1 = section.c1.unwrap_or(1.0);
    let n_max = section.n_max.unwrap_or(4);
    let report = check_assumption(&profile, m, &AssumptionGrids::default_for(&profile), c1, n_max)
        .map_err(|e| cfg.error("assumption", e.to_string()))?;
    let mut mb = ManifestBuilder::start("check-assumption", &cfg.config, cfg.seed(), &opts.out)?;
    write_json(&mb.output("assumption.json"), &report)?;
    mb.manifest_mut().status = if report.pass { "passed" } else { "failed" }.into();
    mb.manifest_mut().details = json!({ "m": m, "c1": c1, "n_max": n_max, "c1_estimate": report.c1_estimate });
    mb.finish()
}

/// Fits an exponential decay rate to one column of a series CSV.
pub fn fit_rate(cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = with_seed(cfg, opts);
    let section = cfg.fit();
    let path = section
        .series
        .as_ref()
        .map(|p| cfg.resolve_path(p))
        .ok_or_else(|| cfg.error("fit.series", "missing path of the series CSV"))?;
    let geometry = cfg.geometry()?;
    let traj = Trajectory::read_csv(&path, geometry)?;
    let column = section.column.clone().unwrap_or_else(|| "l2_fluct".into());
    let values = traj.series(&column)?;
    let (first, last) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidInput(format!("{} holds no samples", path.display()))),
    };
    let window = section.window.unwrap_or([first, last]);
    let fit = fit_decay_rate(&traj.times, values, window)?;

    let mut mb = ManifestBuilder::start("fit-rate", &cfg.config, cfg.seed(), &opts.out)?;
    let mut out = json!({
        "column": column,
        "series": path.display().to_string(),
        "lambda_fit": fit.lambda_fit,
        "window": fit.window,
        "r2": fit.r2,
        "samples": fit.samples,
    });
    if let Some(nu) = cfg.config.nu {
        // Rate of the slowest horizontal mode under diffusion alone.
        let k = 2.0 * std::f64::consts::PI / geometry.lengths[0];
        let diffusive = nu * k * k;
        out["diffusive_rate"] = json!(diffusive);
        out["ratio_to_diffusive"] = json!(fit.lambda_fit / diffusive);
    }
    write_json(&mb.output("fit.json"), &out)?;
    if opts.plot {
        Plot {
            title: &format!("{column} against time"),
            x_label: "t",
            y_label: &column,
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series: vec![Series { label: &column, x: &traj.times, y: values, markers: false }],
        }
        .write(&mb.output("fit.svg"))?;
    }
    mb.manifest_mut().details = out;
    mb.finish()
}
