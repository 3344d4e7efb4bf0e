//! Configuration, experiment drivers and output writing behind the `helical`
//! binary.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

pub use commands::{check, check_assumption_cmd, fit_rate, simulate, sweep_psi, RunOptions};
pub use config::LoadedConfig;
pub use manifest::{read_manifest, RunManifest};

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> helical::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| helical::Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
