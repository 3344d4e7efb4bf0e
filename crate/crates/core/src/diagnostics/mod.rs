//! Scalar series recorded along trajectories, decay-rate fits, bootstrap
//! inequality ledgers and blow-up detection.

mod blowup;
mod fit;
mod ledger;
mod trajectory;

pub use blowup::{blowup_monitor, BlowupCriterion, BlowupMonitor, BlowupStatus, BlowupThresholds};
pub use fit::{fit_decay_rate, DecayFit, MIN_FIT_SAMPLES};
pub use ledger::{
    check_bootstrap_ks, check_bootstrap_kse, default_s_grid, trapezoid_cumulative, BootstrapLedger, Calibration,
    LedgerItem, LedgerKind, ZeroModeBound, DEFAULT_CALIBRATION_FRACTION,
};
pub use trajectory::{series_of, SeriesRecorder, Snapshot, Trajectory, SERIES_COLUMNS};
