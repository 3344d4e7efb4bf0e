//! Experiment configuration files.
//!
//! TOML key-value files with dotted sections. Every subcommand reads the same
//! file and picks the keys it needs; unknown keys are rejected.
//!
//! ```toml
//! kind = "kse"
//! L1 = "4pi"
//! L2 = "4pi"
//! L3 = 5.0
//! N1 = 64
//! nu = 1e-3
//! profile = "constant:1"
//! initial = { type = "random_bandlimited", band = 4, amplitude = 1.0 }
//! t_end = 200.0
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use helical::flows::{ProfileShape, ShearProfile};
use helical::solvers::{InitialData, ProblemConfig, ProblemKind};
use helical::spectral::TorusGeometry;
use helical::{Error, Result};
use serde::{Deserialize, Serialize};

/// A box length: a number or a multiple of pi written as `"2pi"`, `"pi"` or `"0.5*pi"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Value(f64),
    Expr(String),
}

impl Length {
    pub fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Length::Value(v) => Ok(*v),
            Length::Expr(s) => {
                let t = s.trim();
                let Some(head) = t.strip_suffix("pi") else {
                    return t.parse().map_err(|_| format!("cannot read `{s}` as a length"));
                };
                let head = head.trim().trim_end_matches('*').trim();
                if head.is_empty() {
                    Ok(PI)
                } else {
                    head.parse::<f64>().map(|c| c * PI).map_err(|_| format!("cannot read `{s}` as a length"))
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Option<ProblemKind>,
    #[serde(rename = "L1")]
    pub l1: Option<Length>,
    #[serde(rename = "L2")]
    pub l2: Option<Length>,
    #[serde(rename = "L3")]
    pub l3: Option<Length>,
    #[serde(rename = "N1")]
    pub n1: Option<usize>,
    #[serde(rename = "N2")]
    pub n2: Option<usize>,
    #[serde(rename = "N3")]
    pub n3: Option<usize>,
    pub nu: Option<f64>,
    pub gamma: Option<u32>,
    /// `none`, `constant[:A]`, `cosine` or `sampled:v0,v1,...`.
    pub profile: Option<String>,
    pub initial: Option<InitialData>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
    pub dt_max: Option<f64>,
    pub cfl: Option<f64>,
    pub output_stride: Option<usize>,
    /// Outputs between checkpoints; 0 disables them.
    pub checkpoint_every: Option<usize>,
    /// Outputs between stored full states (for the projected-equation check); 0 disables them.
    pub snapshot_every: Option<usize>,
    pub sweep: Option<SweepSection>,
    pub check: Option<CheckSection>,
    pub assumption: Option<AssumptionSection>,
    pub fit: Option<FitSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Overrides the top-level `gamma`.
    pub gamma: Option<u32>,
    pub k: Option<[i64; 2]>,
    pub nus: Option<Vec<f64>>,
    /// `[nu_min, nu_max]`, used with `nu_count` when `nus` is absent.
    pub nu_range: Option<[f64; 2]>,
    pub nu_count: Option<usize>,
    pub ny: Option<usize>,
    pub coarse_points: Option<usize>,
    pub check_doubling: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Series CSV to check; defaults to `series.csv` in the output directory.
    pub trajectory: Option<PathBuf>,
    pub lambda_nu: Option<f64>,
    /// JSON file with a `lambda_fit` or `lambda_nu` field (e.g. from `fit-rate`).
    pub lambda_file: Option<PathBuf>,
    /// Horizon of the companion linear run (defaults to `t_end`).
    pub companion_t_end: Option<f64>,
    /// Fit window of the companion run (defaults to the last three quarters).
    pub companion_window: Option<[f64; 2]>,
    /// Mode of the companion run's initial data.
    pub companion_mode: Option<[i64; 3]>,
    pub s_grid_points: Option<usize>,
    pub calibration_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionSection {
    pub m: Option<u32>,
    pub c1: Option<f64>,
    pub n_max: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Series CSV; defaults to `series.csv` in the output directory.
    pub series: Option<PathBuf>,
    pub column: Option<String>,
    pub window: Option<[f64; 2]>,
}

/// A parsed configuration with the text it came from, so later validation
/// errors can point at a line.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: Config,
    text: String,
    /// Directory that relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        Ok(Self { config, text: text.to_string(), base_dir })
    }

    /// A config error for `key` (dotted for section keys), located at the
    /// line that sets it, or line 0 when the key is absent.
    pub fn error(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Config { line: self.line_of(key), key: key.to_string(), msg: msg.into() }
    }

    fn line_of(&self, key: &str) -> usize {
        let (section, name) = match key.rsplit_once('.') {
            Some((s, n)) => (s, n),
            None => ("", key),
        };
        let mut current = String::new();
        for (i, line) in self.text.lines().enumerate() {
            let l = line.trim();
            if let Some(h) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = h.trim().to_string();
                continue;
            }
            let Some((lhs, _)) = l.split_once('=') else { continue };
            let lhs = lhs.trim();
            let full = if current.is_empty() { lhs.to_string() } else { format!("{current}.{lhs}") };
            if full == key || (current == section && lhs == name) || full.starts_with(&format!("{key}.")) {
                return i + 1;
            }
        }
        0
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn length(&self, key: &str, value: &Option<Length>) -> Result<f64> {
        match value {
            None => Ok(2.0 * PI),
            Some(l) => {
                let v = l.value().map_err(|m| self.error(key, m))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(self.error(key, format!("length must be positive, got {v}")));
                }
                Ok(v)
            }
        }
    }

    /// Box and grid; lengths default to 2 pi and sizes to 32.
    pub fn geometry(&self) -> Result<TorusGeometry> {
        let c = &self.config;
        let lengths = [self.length("L1", &c.l1)?, self.length("L2", &c.l2)?, self.length("L3", &c.l3)?];
        let sizes = [c.n1.unwrap_or(32), c.n2.unwrap_or(32), c.n3.unwrap_or(32)];
        for (a, &n) in sizes.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(self.error(&format!("N{}", a + 1), format!("grid size must be even and >= 4, got {n}")));
            }
        }
        TorusGeometry::new(lengths, sizes)
    }

    pub fn profile_shape(&self) -> Result<ProfileShape> {
        match &self.config.profile {
            None => Ok(ProfileShape::Constant(0.0)),
            Some(s) => s.parse().map_err(|e: Error| self.error("profile", e.to_string())),
        }
    }

    pub fn shear_profile(&self) -> Result<ShearProfile> {
        let period = self.geometry()?.lengths[2];
        Ok(ShearProfile { shape: self.profile_shape()?, period })
    }

    pub fn nu(&self) -> Result<f64> {
        let nu = self.config.nu.ok_or_else(|| self.error("nu", "missing"))?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(self.error("nu", format!("must be positive, got {nu}")));
        }
        Ok(nu)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    /// The problem to simulate.
    pub fn problem(&self) -> Result<ProblemConfig> {
        let c = &self.config;
        let kind = c.kind.ok_or_else(|| self.error("kind", "missing (adv_diff, kse or keller_segel)"))?;
        let initial = c.initial.clone().ok_or_else(|| self.error("initial", "missing"))?;
        let mut p = ProblemConfig::new(kind, self.geometry()?, self.nu()?, initial);
        let shape = self.profile_shape()?;
        p.profile = match shape {
            ProfileShape::Constant(a) if a == 0.0 => None,
            s => Some(s),
        };
        p.gamma = c.gamma.unwrap_or(1);
        if kind != ProblemKind::AdvDiff && p.gamma != 1 {
            return Err(self.error("gamma", "only advection-diffusion takes gamma"));
        }
        if !(p.gamma == 1 || p.gamma == 2) {
            return Err(self.error("gamma", format!("must be 1 or 2, got {}", p.gamma)));
        }
        p.seed = self.seed();
        p.t_end = c.t_end.unwrap_or(p.t_end);
        p.dt_max = c.dt_max.unwrap_or(p.dt_max);
        p.cfl = c.cfl.unwrap_or(p.cfl);
        p.output_stride = c.output_stride.unwrap_or(p.output_stride);
        for (key, v) in [("t_end", p.t_end), ("dt_max", p.dt_max), ("cfl", p.cfl)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.error(key, format!("must be positive, got {v}")));
            }
        }
        if p.output_stride == 0 {
            return Err(self.error("output_stride", "must be at least 1"));
        }
        p.validate().map_err(|e| self.error("nu", e.to_string()))?;
        Ok(p)
    }

    pub fn sweep(&self) -> SweepSection {
        self.config.sweep.clone().unwrap_or_default()
    }

    pub fn check(&self) -> CheckSection {
        self.config.check.clone().unwrap_or_default()
    }

    pub fn assumption(&self) -> AssumptionSection {
        self.config.assumption.clone().unwrap_or_default()
    }

    pub fn fit(&self) -> FitSection {
        self.config.fit.clone().unwrap_or_default()
    }

    /// The list of viscosities of a sweep: `sweep.nus`, or `nu_count`
    /// log-spaced values over `sweep.nu_range`.
    pub fn sweep_nus(&self) -> Result<Vec<f64>> {
        let s = self.sweep();
        let nus = match (&s.nus, s.nu_range) {
            (Some(v), _) => v.clone(),
            (None, Some([a, b])) => {
                let n = s.nu_count.unwrap_or(7);
                if !(a > 0.0 && b > a) || n < 2 {
                    return Err(self.error("sweep.nu_range", "need 0 < nu_min < nu_max and nu_count >= 2"));
                }
                (0..n).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
            }
            (None, None) => return Err(self.error("sweep.nus", "missing (give nus or nu_range)")),
        };
        if nus.is_empty() {
            return Err(self.error("sweep.nus", "empty list"));
        }
        if let Some(bad) = nus.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(self.error("sweep.nus", format!("values must be positive, got {bad}")));
        }
        Ok(nus)
    }
}

/// Line of a byte offset (1-based).
fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let line = e.span().map_or(0, |s| line_at(text, s.start));
    // Unknown and missing fields name the key in backticks.
    let key = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| {
            let l = text.lines().nth(line.checked_sub(1)?)?;
            Some(l.split('=').next()?.trim().trim_matches(|c| c == '[' || c == ']').to_string())
        })
        .unwrap_or_default();
    Error::Config { line, key, msg }
}
