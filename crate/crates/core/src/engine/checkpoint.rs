//! Checkpoint file: `PUTWBCKP`, format version (u32 LE), payload length
//! (u64 LE), JSON payload, then SHA-256 over everything before it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EngineError, ExperimentSpec, RunState, TaskFailure, TaskRecord};
use crate::error::{Error, Result};
use crate::genset::{GeneratorCursor, PlanReport};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PUTWBCKP";
const HEADER: usize = 8 + 4 + 8;
const TRAILER: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: ExperimentSpec,
    pub spec_digest: String,
    pub state: RunState,
    /// Generator position after the last committed task.
    pub cursor: GeneratorCursor,
    /// Index the next emitted task will get.
    pub next_index: u64,
    pub class_count: usize,
    pub results: Vec<TaskRecord>,
    pub failures: Vec<TaskFailure>,
    pub report: PlanReport,
    pub elapsed_s: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = serde_json::to_vec(self).expect("checkpoint always serializes");
        let mut out = Vec::with_capacity(HEADER + payload.len() + TRAILER);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EngineError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            if MAGIC.starts_with(bytes) {
                return Err(EngineError::TornCheckpoint("file ends inside the header".into()));
            }
            return Err(EngineError::NotACheckpoint);
        }
        if bytes.len() < HEADER {
            return Err(EngineError::TornCheckpoint("file ends inside the header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(EngineError::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let body_end = (HEADER as u64).checked_add(len).filter(|&e| e <= bytes.len() as u64);
        let Some(body_end) = body_end.map(|e| e as usize) else {
            return Err(EngineError::TornCheckpoint(format!(
                "payload of {len} bytes declared, {} present",
                bytes.len() - HEADER
            )));
        };
        if bytes.len() != body_end + TRAILER {
            return Err(EngineError::TornCheckpoint("checksum missing or trailing bytes".into()));
        }
        if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
            return Err(EngineError::TornCheckpoint("checksum does not match".into()));
        }
        let ckpt: Checkpoint = serde_json::from_slice(&bytes[HEADER..body_end])
            .map_err(|e| EngineError::TornCheckpoint(format!("payload: {e}")))?;
        if ckpt.spec.digest() != ckpt.spec_digest {
            return Err(EngineError::DigestMismatch {
                expected: ckpt.spec_digest.clone(),
                found: ckpt.spec.digest(),
            });
        }
        Ok(ckpt)
    }

    /// Replaces `path` atomically: a crash leaves the old file or the new
    /// one, never a mixture.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
