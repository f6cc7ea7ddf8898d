//! Re-evaluation of chosen attribute sets on every row.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::ToolsError;
use crate::dataset::Dataset;
use crate::engine::{evaluate_sets, Control};
use crate::error::Result;
use crate::metrics::{sort_results, ClassField, Field, SortCriteria, TaskResult};
use crate::putmodel::{AttributeSet, PutConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedSet {
    /// The experiment's row for this set, when one was supplied.
    pub experiment: Option<TaskResult>,
    pub full: TaskResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub class_count: usize,
    /// Ordered by the default sort criteria applied to the full-data results.
    pub rows: Vec<VerifiedSet>,
    pub failures: Vec<(AttributeSet, String)>,
}

/// The first `n` rows of `results` under `criteria`.
pub fn select_top(results: &[TaskResult], criteria: &SortCriteria, n: usize) -> Vec<TaskResult> {
    let mut rows = results.to_vec();
    sort_results(&mut rows, criteria);
    rows.truncate(n);
    rows
}

/// Evaluates each set on all rows with the cross-validation protocol of
/// `cfg`; the vertical and horizontal expenses of `cfg` are ignored.
pub fn verify(ds: &Dataset, cfg: &PutConfig, sets: &[AttributeSet], workers: usize) -> Result<VerificationReport> {
    let pairs: Vec<(AttributeSet, Option<TaskResult>)> = sets.iter().map(|s| (s.clone(), None)).collect();
    run(ds, cfg, pairs, workers)
}

/// Like [`verify`], pairing each full-data result with the given
/// experiment row.
pub fn verify_results(
    ds: &Dataset,
    cfg: &PutConfig,
    experiment: &[TaskResult],
    workers: usize,
) -> Result<VerificationReport> {
    let pairs = experiment
        .iter()
        .map(|r| (r.attribute_set.clone(), Some(r.clone())))
        .collect();
    run(ds, cfg, pairs, workers)
}

fn run(
    ds: &Dataset,
    cfg: &PutConfig,
    mut pairs: Vec<(AttributeSet, Option<TaskResult>)>,
    workers: usize,
) -> Result<VerificationReport> {
    let mut seen = HashSet::new();
    pairs.retain(|(s, _)| seen.insert(s.clone()));
    if pairs.is_empty() {
        return Err(ToolsError::EmptySetList.into());
    }
    if let Some((s, _)) = pairs.iter().find(|(s, _)| s.max_index() as usize > ds.n()) {
        return Err(ToolsError::UnknownAttribute {
            set: s.to_string(),
            n: ds.n(),
        }
        .into());
    }
    let mut full_cfg = cfg.clone();
    full_cfg.horizontal_expense = 1.0;
    full_cfg.vertical_expense = 1.0;
    let sets: Vec<AttributeSet> = pairs.iter().map(|p| p.0.clone()).collect();
    let outcomes = evaluate_sets(ds, &full_cfg, &sets, workers, true, &Control::new());
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((set, experiment), outcome) in pairs.into_iter().zip(outcomes) {
        match outcome.expect("verification is never cancelled") {
            Ok(full) => rows.push(VerifiedSet { experiment, full }),
            Err(e) => failures.push((set, e)),
        }
    }
    let criteria = SortCriteria::default();
    rows.sort_by(|a, b| criteria.compare(&a.full, &b.full));
    Ok(VerificationReport {
        class_count: ds.class_count(),
        rows,
        failures,
    })
}

fn columns(class_count: usize) -> Vec<Field> {
    let mut f = vec![Field::TimeTaken, Field::Accuracy];
    for i in 0..class_count {
        f.extend(ClassField::ALL.iter().map(|&c| Field::Class(i, c)));
    }
    f
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v:.5}").unwrap();
    }
}

/// Each metric as `<name>_exp,<name>_full,<name>_delta`, the delta being
/// full minus experiment.
pub fn render_report_csv(report: &VerificationReport) -> String {
    let fields = columns(report.class_count);
    let mut out = String::from("attribute_set");
    for f in &fields {
        write!(out, ",{f}_exp,{f}_full,{f}_delta").unwrap();
    }
    out.push('\n');
    for row in &report.rows {
        write!(out, "\"{}\"", row.full.attribute_set).unwrap();
        for f in &fields {
            let exp = row.experiment.as_ref().and_then(|r| f.value(r));
            let full = f.value(&row.full);
            cell(&mut out, exp);
            cell(&mut out, full);
            cell(&mut out, exp.zip(full).map(|(e, f)| f - e));
        }
        out.push('\n');
    }
    out
}
