//! Front door over checkpoint dump and resume.

use std::path::{Path, PathBuf};

use super::ToolsError;
use crate::engine::{dump, resume_experiment, Checkpoint, Control, RunObserver, RunOutcome};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoverMode {
    /// Write the checkpoint's results to a CSV without running anything.
    Dump { output: PathBuf },
    /// Continue the run to completion.
    Resume,
}

pub fn recover(
    path: &Path,
    mode: &RecoverMode,
    control: &Control,
    observer: &mut dyn RunObserver,
) -> Result<RunOutcome> {
    if !path.is_file() {
        return Err(ToolsError::FileNotFound(path.to_path_buf()).into());
    }
    match mode {
        RecoverMode::Dump { output } => dump(&Checkpoint::load(path)?, output),
        RecoverMode::Resume => resume_experiment(path, None, control, observer),
    }
}
