//! Experiment execution: a generator feeding a worker pool, results
//! committed in task order, periodic checkpoints, pause/resume/cancel.

mod checkpoint;
mod control;
mod results;
mod run;
mod spec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{write_atomic, Checkpoint, CHECKPOINT_VERSION};
pub use control::{Control, ControlSignal};
pub use results::{header, parse_results_csv, read_results_csv, render_results_csv, write_results_csv};
pub use run::{
    dump, evaluate_set, evaluate_sets, resume_experiment, resume_with, run_experiment, run_with, CrossValidation,
    NoObserver, RunObserver, RunOutcome, TaskEvaluator,
};
pub use spec::{parse_dataset, require_valid, DataFormat, DatasetRef, ExperimentSpec, PreparedExperiment};

use crate::dataset::Violation;
use crate::metrics::TaskResult;
use crate::putmodel::AttributeSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("dataset is not usable: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    InvalidDataset(Vec<Violation>),
    #[error("digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("checkpoint format version {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint is torn or corrupt: {0}")]
    TornCheckpoint(String),
    #[error("file is not a checkpoint")]
    NotACheckpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Pending,
    Running,
    Paused,
    Completed,
    Failed,
    Cancelled,
    /// Results were exported from a checkpoint without running.
    Recovered,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RunState::Completed | RunState::Failed | RunState::Cancelled | RunState::Recovered
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: u64,
    pub result: TaskResult,
}

/// A task whose evaluation failed; the run carries on without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub index: u64,
    pub attribute_set: AttributeSet,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub state: RunState,
    /// Tasks committed so far, failures included.
    pub done: u64,
    pub total: u64,
    pub failed: u64,
    pub elapsed_s: f64,
    pub eta_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

impl ExperimentStatus {
    pub fn pending(total: u64) -> Self {
        ExperimentStatus {
            state: RunState::Pending,
            done: 0,
            total,
            failed: 0,
            elapsed_s: 0.0,
            eta_s: None,
            last_error: None,
        }
    }
}
