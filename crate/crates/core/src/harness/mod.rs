//! Monte Carlo experiments: scenarios, parallel replications, convergence
//! diagnostics, power curves and their exports.

mod diagnostics;
mod export;
mod power;
mod replicate;
pub mod scenario;
pub mod stats;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use diagnostics::{
    convergence_diagnostics, Checkpoint, ColorDiagnostic, ConvergenceReport, PathDiagnostics,
    CONVERGENCE_TOLERANCE,
};
pub use export::{
    export_json, import_json, sidecar_path, write_histogram_csv, write_meta_sidecar,
    write_power_csv, write_summary_csv, Metadata, SeedSource,
};
pub use power::{power_curve, PowerCurve, PowerRow};
pub use replicate::{
    parallel_map, run_replications, simulate_one, Histogram, PowerEstimate, ReplicationOutcome,
    ReplicationSummary, TestPlan, HISTOGRAM_BINS,
};
pub use scenario::{
    builtin_names, builtin_scenarios, find_builtin, parse_scenario_family_file,
    parse_scenario_file, ScenarioSpec,
};

use crate::inference::InferenceError;
use crate::urn::UrnError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("every replication failed; first error: {0}")]
    AllReplicationsFailed(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl HarnessError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            msg: err.to_string(),
        }
    }

    /// Whether the error comes from bad input rather than from running.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse(_) | HarnessError::InvalidScenario(_)
        ) || matches!(self, HarnessError::Urn(e) if !matches!(e, UrnError::Sampling(_)))
    }
}
