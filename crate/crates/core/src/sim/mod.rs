//! Closed-loop simulation, load/reference schedules and trace I/O.

mod config;
mod engine;
mod profile;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{SimConfig, StepPlan, CONFIG_KEYS, RPM_TO_RAD_S};
pub use engine::{
    run_simulation, run_simulation_observed, simulate_with_summary, RunSummary, SteadyStateMonitor,
    StepSample, DIVERGENCE_LIMIT, SETTLE_BAND, SUMMARY_WINDOW,
};
pub use profile::{load_profile_eval, reference_profile_eval, Profile};
pub use trace::{
    export_csv, format_sig9, import_csv, ColumnSource, ColumnTable, Trace, TraceRecord,
    TRACE_COLUMNS,
};

use crate::drive::DriveError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("profile has no breakpoints")]
    EmptyProfile,
    #[error("numerical divergence at t = {time} s (state magnitude above 1e6)")]
    NumericalDivergence { time: f64 },
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV header mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("parse failure at row {row}, column `{column}`: {detail}")]
    ParseFailure {
        row: usize,
        column: String,
        detail: String,
    },
}
