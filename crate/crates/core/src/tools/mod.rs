//! Auxiliary tools: re-evaluation on the full dataset, checkpoint
//! recovery, and parameter suggestion.

mod autopilot;
mod recover;
mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use autopilot::{autopilot, AutopilotOptions, AutopilotSuggestion, RuntimeClass};
pub use recover::{recover, RecoverMode};
pub use verify::{render_report_csv, select_top, verify, verify_results, VerificationReport, VerifiedSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolsError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("no attribute sets to verify")]
    EmptySetList,
    #[error("attribute set {set} refers past attribute {n}")]
    UnknownAttribute { set: String, n: usize },
}
