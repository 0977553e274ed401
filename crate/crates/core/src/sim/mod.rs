//! Monte Carlo experiments: configuration, seeded parallel sweeps, the
//! named presets and CSV output.

mod config;
mod csv;
mod experiments;
mod presets;
mod seed;
mod sweep;

pub use config::{
    ExperimentConfig, ExperimentKind, LrtThresholdMode, ReportSteps, RoleMode, Surrogate, ThresholdScheme,
};
pub use csv::{emit_csv, parse_csv, write_csv, CSV_HEADER};
pub use experiments::{run_blinding, run_estimator};
pub use presets::{preset, PRESET_NAMES};
pub use sweep::{run_detection, run_trial, Coordinate, SweepRecord, TrialOutcome};

use crate::error::Result;

/// Runs whichever experiment the config describes.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| crate::error::Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cfg.kind {
        ExperimentKind::Detection => run_detection(cfg),
        ExperimentKind::Estimator => run_estimator(cfg),
        ExperimentKind::Blinding => run_blinding(cfg),
    })
}

/// Half-width of the 95% normal-approximation interval of a proportion.
pub fn ci_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}
