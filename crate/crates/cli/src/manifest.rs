use std::path::{Path, PathBuf};
use std::time::Instant;

use helical::integrator::Termination;
use helical::spectral::TorusGeometry;
use helical::Result;
use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run, written as `manifest.json` into its output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    /// Resolved grid, when the command uses one.
    pub geometry: Option<TorusGeometry>,
    pub seed: u64,
    /// ISO-8601 start time.
    pub started_at: String,
    pub wall_clock_seconds: f64,
    /// Output files relative to the run directory.
    pub outputs: Vec<PathBuf>,
    /// `completed`, `blowup_suspected`, `overflow`, `stopped`, `passed` or `failed`.
    pub status: String,
    pub termination: Option<Termination>,
    pub warnings: Vec<String>,
    /// Command-specific summary values.
    pub details: serde_json::Value,
}

/// Collects a manifest while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
    dir: PathBuf,
}

impl ManifestBuilder {
    pub fn start(command: &str, config: &Config, seed: u64, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
                geometry: None,
                seed,
                started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                wall_clock_seconds: 0.0,
                outputs: Vec::new(),
                status: "completed".into(),
                termination: None,
                warnings: Vec::new(),
                details: serde_json::Value::Null,
            },
            started: Instant::now(),
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of an output file inside the run directory, recorded in the manifest.
    pub fn output(&mut self, name: impl AsRef<Path>) -> PathBuf {
        self.manifest.outputs.push(name.as_ref().to_path_buf());
        self.dir.join(name)
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
    Ok(serde_json::from_str(&text)?)
}
