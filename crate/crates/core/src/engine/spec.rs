//! Experiment specification and dataset preparation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::dataset::{self, ArffOptions, CleanOptions, CleanReport, CsvOptions, Dataset};
use crate::digest::{json_digest, sha256_hex};
use crate::error::{Error, Result};
use crate::genset::GenerationPlan;
use crate::putmodel::{PutConfig, DEFAULT_BUDGET_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Arff,
    Csv,
}

impl DataFormat {
    /// Guesses from the file extension, defaulting to ARFF.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "csv" => DataFormat::Csv,
            _ => DataFormat::Arff,
        }
    }

    /// Guesses from content: ARFF files start with a comment or `@relation`.
    pub fn sniff(bytes: &[u8]) -> Self {
        let text = String::from_utf8_lossy(&bytes[..bytes.len().min(4096)]);
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('%'));
        match first {
            Some(l) if l.to_ascii_lowercase().starts_with("@relation") => DataFormat::Arff,
            None => DataFormat::Arff,
            _ if text.trim_start().starts_with('%') => DataFormat::Arff,
            _ => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    /// SHA-256 of the file bytes. Filled in when the experiment starts and
    /// checked on every later load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DataFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_attribute: Option<String>,
}

fn default_interval() -> u64 {
    50
}
fn default_cap() -> Option<u64> {
    Some(DEFAULT_BUDGET_CAP)
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetRef,
    pub config: PutConfig,
    #[serde(default)]
    pub clean: CleanOptions,
    /// Result CSV; the checkpoint goes next to it as `<output>.ckpt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default = "default_interval")]
    pub checkpoint_interval: u64,
    /// Worker threads; does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Ceiling on tasks; `null` removes it.
    #[serde(default = "default_cap")]
    pub budget_cap: Option<u64>,
    /// When false every `time_taken` is written as 0, making result files
    /// byte-identical across runs.
    #[serde(default = "default_true")]
    pub record_timing: bool,
    /// Front ends replace the expenses and generation method with an
    /// autopilot suggestion before the run starts.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub autopilot: bool,
}

/// The parts of a spec that determine results.
#[derive(Serialize)]
struct DigestView<'a> {
    dataset_digest: &'a Option<String>,
    format: &'a Option<DataFormat>,
    class_attribute: &'a Option<String>,
    config: &'a PutConfig,
    clean: &'a CleanOptions,
    budget_cap: &'a Option<u64>,
}

impl ExperimentSpec {
    pub fn new(path: impl Into<PathBuf>, config: PutConfig) -> Self {
        ExperimentSpec {
            dataset: DatasetRef {
                path: path.into(),
                digest: None,
                format: None,
                class_attribute: None,
            },
            config,
            clean: CleanOptions::default(),
            output: None,
            checkpoint: None,
            checkpoint_interval: default_interval(),
            workers: None,
            budget_cap: default_cap(),
            record_timing: true,
            autopilot: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("experiment spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec always serializes")
    }

    /// Content hash over everything that affects results; worker count,
    /// output paths and the checkpoint interval are left out.
    pub fn digest(&self) -> String {
        json_digest(&DigestView {
            dataset_digest: &self.dataset.digest,
            format: &self.dataset.format,
            class_attribute: &self.dataset.class_attribute,
            config: &self.config,
            clean: &self.clean,
            budget_cap: &self.budget_cap,
        })
    }

    pub fn checkpoint_path(&self) -> Option<PathBuf> {
        self.checkpoint.clone().or_else(|| {
            self.output.as_ref().map(|o| {
                let mut s = o.as_os_str().to_owned();
                s.push(".ckpt");
                PathBuf::from(s)
            })
        })
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

/// Parses dataset bytes in the given (or sniffed) format.
pub fn parse_dataset(
    bytes: &[u8],
    format: Option<DataFormat>,
    class_attribute: Option<&str>,
    name: &str,
) -> Result<Dataset> {
    let ds = match format.unwrap_or_else(|| DataFormat::sniff(bytes)) {
        DataFormat::Arff => dataset::parse_arff_with(
            bytes,
            &ArffOptions {
                class_attribute: class_attribute.map(str::to_string),
            },
        )?,
        DataFormat::Csv => dataset::parse_csv(
            bytes,
            &CsvOptions {
                class_column: class_attribute.map(str::to_string),
                source_name: Some(name.to_string()),
            },
        )?,
    };
    Ok(ds)
}

/// Fails with the violation list when `ds` cannot be experimented on.
pub fn require_valid(ds: &Dataset) -> Result<()> {
    let violations = dataset::validate(ds);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidDataset(violations).into())
    }
}

/// A spec bound to its cleaned dataset and generation plan.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub spec: ExperimentSpec,
    pub spec_digest: String,
    pub dataset: Arc<Dataset>,
    pub clean_report: CleanReport,
    pub plan: GenerationPlan,
}

impl PreparedExperiment {
    /// Reads the dataset file named by the spec.
    pub fn load(spec: ExperimentSpec) -> Result<Self> {
        let path = spec.dataset.path.clone();
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_bytes(spec, &bytes)
    }

    /// Uses `bytes` as the dataset content. A digest already present in the
    /// spec must match them.
    pub fn from_bytes(mut spec: ExperimentSpec, bytes: &[u8]) -> Result<Self> {
        spec.config.validate()?;
        let actual = sha256_hex(bytes);
        match &spec.dataset.digest {
            Some(expected) if *expected != actual => {
                return Err(EngineError::DigestMismatch {
                    expected: expected.clone(),
                    found: actual,
                }
                .into())
            }
            _ => spec.dataset.digest = Some(actual),
        }
        let format = spec
            .dataset
            .format
            .or_else(|| (!spec.dataset.path.as_os_str().is_empty()).then(|| DataFormat::from_path(&spec.dataset.path)));
        let name = spec
            .dataset
            .path
            .file_name()
            .map_or_else(|| "dataset".to_string(), |f| f.to_string_lossy().into_owned());
        let raw = parse_dataset(bytes, format, spec.dataset.class_attribute.as_deref(), &name)?;
        require_valid(&raw)?;
        let (ds, clean_report) = dataset::clean(&raw, spec.clean)?;
        require_valid(&ds)?;
        let plan = GenerationPlan::from_config(&spec.config, ds.n(), spec.budget_cap)?;
        Ok(PreparedExperiment {
            spec_digest: spec.digest(),
            spec,
            dataset: Arc::new(ds),
            clean_report,
            plan,
        })
    }

    /// Binds a spec to a dataset already in memory (parsed and validated).
    pub fn from_dataset(mut spec: ExperimentSpec, ds: Arc<Dataset>, digest: String) -> Result<Self> {
        spec.config.validate()?;
        spec.dataset.digest = Some(digest);
        let (ds, clean_report) = if spec.clean == CleanOptions::default() {
            let report = CleanReport {
                rows_in: ds.m(),
                rows_out: ds.m(),
                ..Default::default()
            };
            (ds, report)
        } else {
            let (c, r) = dataset::clean(&ds, spec.clean)?;
            (Arc::new(c), r)
        };
        require_valid(&ds)?;
        let plan = GenerationPlan::from_config(&spec.config, ds.n(), spec.budget_cap)?;
        Ok(PreparedExperiment {
            spec_digest: spec.digest(),
            spec,
            dataset: ds,
            clean_report,
            plan,
        })
    }
}
