//! Evaluation, experiment orchestration and reporting.

mod controller;
mod eval;
mod experiment;
mod metrics;
mod plot;
mod report;

pub use controller::{ConstantController, Controller, ControllerFactory, DwaController, PolicyController};
pub use eval::{evaluate, run_episode, EvalPlan, EpisodeRecord};
pub use experiment::{run_experiment, ExperimentConfig, MetricsRow, RunManifest, RunOptions, RUN_MANIFEST_FORMAT};
pub use metrics::{EnvBreakdown, Metrics};
pub use report::{format_cell, report, ReportSummary};

use crate::envgen::EnvGenError;
use crate::nn::NnError;
use crate::rl::RlError;
use crate::sim::trace::TraceError;
use crate::sim::SimError;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable capping worker and evaluation threads.
pub const THREADS_ENV: &str = "BARNBENCH_THREADS";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Catalog(#[from] EnvGenError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("no runs to report")]
    EmptyRunSet,
    #[error("runs are not comparable: {0}")]
    Incompatible(String),
}

impl BenchError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Thread cap from `BARNBENCH_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Sizes the global evaluation pool from `BARNBENCH_THREADS`; call once at startup.
pub fn configure_threads() -> Option<usize> {
    let n = thread_cap()?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}
