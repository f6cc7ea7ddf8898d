//! Turning flags and spec files into experiment specs.

use std::path::{Path, PathBuf};

use putwb_core::dataset::{self, CleanOptions, CleanReport, Dataset};
use putwb_core::engine::{parse_dataset, require_valid, DataFormat, ExperimentSpec};
use putwb_core::learners::LearnerKind;
use putwb_core::putmodel::parse_set_list;
use putwb_core::tools::{autopilot, AutopilotOptions};
use putwb_core::{AttributeSet, PutConfig, SizeSpec};

use crate::args::{DatasetArgs, ExperimentArgs, LearnerArgs};
use crate::Failure;

pub const WORKERS_ENV: &str = "PUTWB_WORKERS";

/// Worker count from the environment, if set and valid.
pub fn env_workers() -> Result<Option<usize>, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{WORKERS_ENV}=`{v}` is not a worker count"))),
        _ => Ok(None),
    }
}

/// Reads sets, one per line. Blank lines and `#` comments are skipped; a
/// line may hold several sets joined by `;`.
pub fn read_set_file(path: &Path) -> Result<Vec<AttributeSet>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = parse_set_list(line).map_err(|e| Failure::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        sets.extend(parsed);
    }
    Ok(sets)
}

fn set_sources(literal: &Option<String>, file: &Option<PathBuf>) -> Result<Option<Vec<AttributeSet>>, Failure> {
    if literal.is_none() && file.is_none() {
        return Ok(None);
    }
    let mut sets = match literal {
        Some(s) => parse_set_list(s).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Vec::new(),
    };
    if let Some(path) = file {
        sets.extend(read_set_file(path)?);
    }
    Ok(Some(sets))
}

pub fn parse_learner(name: &str) -> Result<LearnerKind, Failure> {
    name.parse().map_err(Failure::Usage)
}

/// Applies learner flags to `cfg`.
pub fn apply_learner(cfg: &mut PutConfig, a: &LearnerArgs) -> Result<(), Failure> {
    if let Some(name) = &a.learner {
        cfg.learner = parse_learner(name)?;
    }
    let tree_flags = a.min_leaf.is_some() || a.confidence.is_some() || a.no_pruning;
    match &mut cfg.learner {
        LearnerKind::DecisionTree(p) => {
            if let Some(n) = a.min_leaf {
                p.min_leaf = n;
            }
            if let Some(c) = a.confidence {
                p.confidence = c;
            }
            if a.no_pruning {
                p.use_pruning = false;
            }
        }
        LearnerKind::NaiveBayes if tree_flags => {
            return Err(Failure::Usage(
                "--min-leaf, --confidence and --no-pruning need the tree learner".into(),
            ))
        }
        LearnerKind::NaiveBayes => {}
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(f) = a.folds {
        cfg.folds = f;
    }
    Ok(())
}

fn apply_dataset(spec: &mut ExperimentSpec, d: &DatasetArgs) {
    if let Some(p) = &d.dataset {
        if *p != spec.dataset.path {
            spec.dataset.digest = None;
        }
        spec.dataset.path = p.clone();
    }
    if let Some(f) = d.format {
        spec.dataset.format = Some(f.into());
    }
    if let Some(c) = &d.class {
        spec.dataset.class_attribute = Some(c.clone());
    }
    if let Some(m) = d.missing {
        spec.clean.missing = m.into();
    }
    if let Some(x) = d.dedupe {
        spec.clean.dedupe = x.into();
    }
}

/// Expense and generation flags, which also override an autopilot
/// suggestion.
pub fn apply_expenses(cfg: &mut PutConfig, a: &ExperimentArgs) {
    if let Some(v) = a.vertical_expense {
        cfg.vertical_expense = v;
    }
    if let Some(h) = a.horizontal_expense {
        cfg.horizontal_expense = h;
    }
    if let Some(g) = a.generation {
        cfg.generation = g.into();
    }
}

/// The spec file (if any) with every given flag applied on top. `size`
/// replaces the file's size when set.
pub fn build_spec(size: Option<SizeSpec>, a: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => {
            let dataset = a
                .data
                .dataset
                .clone()
                .ok_or_else(|| Failure::Usage("--dataset is required without --spec".into()))?;
            let size =
                size.ok_or_else(|| Failure::Usage("one of --partition-size or --put-number is required".into()))?;
            ExperimentSpec::new(dataset, PutConfig::new(size, LearnerKind::tree()))
        }
    };
    if let Some(size) = size {
        spec.config.size = size;
    }
    apply_dataset(&mut spec, &a.data);
    apply_learner(&mut spec.config, &a.learner)?;
    if let Some(sets) = set_sources(&a.privacy, &a.privacy_file)? {
        spec.config.privacy_exceptions = sets;
    }
    if let Some(sets) = set_sources(&a.utility, &a.utility_file)? {
        spec.config.utility_exceptions = sets;
    }
    apply_expenses(&mut spec.config, a);
    if let Some(o) = &a.out {
        spec.output = Some(o.clone());
    }
    if let Some(c) = &a.checkpoint {
        spec.checkpoint = Some(c.clone());
    }
    if let Some(i) = a.checkpoint_interval {
        spec.checkpoint_interval = i;
    }
    if let Some(w) = a.workers {
        spec.workers = Some(w);
    } else if spec.workers.is_none() {
        spec.workers = env_workers()?;
    }
    if let Some(cap) = a.budget_cap {
        spec.budget_cap = Some(cap);
    }
    if a.no_budget_cap {
        spec.budget_cap = None;
    }
    if a.no_timing {
        spec.record_timing = false;
    }
    if a.autopilot {
        spec.autopilot = true;
    }
    if a.no_autopilot {
        spec.autopilot = false;
    }
    if spec.checkpoint_interval == 0 {
        return Err(Failure::Usage("checkpoint interval must be at least 1".into()));
    }
    if spec.workers == Some(0) {
        return Err(Failure::Usage("worker count must be at least 1".into()));
    }
    spec.config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

/// Parses, validates and cleans a dataset file.
pub fn load_dataset(
    path: &Path,
    format: Option<DataFormat>,
    class: Option<&str>,
    clean: CleanOptions,
) -> Result<(Dataset, CleanReport), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let format = format.unwrap_or_else(|| DataFormat::from_path(path));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let raw = parse_dataset(&bytes, Some(format), class, &name)?;
    require_valid(&raw)?;
    let (ds, report) = dataset::clean(&raw, clean).map_err(putwb_core::Error::from)?;
    require_valid(&ds)?;
    Ok((ds, report))
}

pub fn dataset_args_load(d: &DatasetArgs) -> Result<(Dataset, CleanReport), Failure> {
    let path = d
        .dataset
        .as_ref()
        .ok_or_else(|| Failure::Usage("--dataset is required".into()))?;
    let clean = CleanOptions {
        missing: d.missing.map(Into::into).unwrap_or_default(),
        dedupe: d.dedupe.map(Into::into).unwrap_or_default(),
    };
    load_dataset(path, d.format.map(Into::into), d.class.as_deref(), clean)
}

/// Replaces expenses and generation with the autopilot suggestion when the
/// spec asks for it, then reapplies explicit flags.
pub fn engage_autopilot(spec: &mut ExperimentSpec, a: &ExperimentArgs) -> Result<(), Failure> {
    if !spec.autopilot {
        return Ok(());
    }
    let (ds, _) = load_dataset(
        &spec.dataset.path,
        spec.dataset.format,
        spec.dataset.class_attribute.as_deref(),
        spec.clean,
    )?;
    let options = AutopilotOptions {
        folds: spec.config.folds,
        workers: spec.workers,
        ..Default::default()
    };
    let s = autopilot(&ds, spec.config.size, &spec.config.learner, &options)?;
    for note in &s.notes {
        log::info!("autopilot: {note}");
    }
    s.apply(&mut spec.config);
    apply_expenses(&mut spec.config, a);
    log::info!(
        "autopilot: v = {}, h = {}, generation {:?}, about {} tasks",
        spec.config.vertical_expense,
        spec.config.horizontal_expense,
        spec.config.generation,
        s.estimated_tasks
    );
    Ok(())
}
