//! Per-task metric record: accuracy, one-vs-rest rates, ROC and PR areas,
//! and multi-key sorting of result rows.

mod curves;
mod sort;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curves::{pr_auc, roc_auc};
pub use sort::{sort_results, ClassField, Direction, Field, SortCriteria};

use crate::learners::FoldPredictions;
use crate::putmodel::AttributeSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("unknown result field `{0}`")]
    UnknownField(String),
    #[error("malformed sort criteria `{0}`")]
    BadCriteria(String),
    #[error("no predictions to score")]
    NoPredictions,
}

/// Metrics of one class treated as positive. `None` marks a value that is
/// undefined for the data (no positives, or no negatives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: Option<f64>,
    pub fp: Option<f64>,
    #[serde(rename = "fn")]
    pub fn_rate: Option<f64>,
    pub precision: f64,
    pub recall: Option<f64>,
    pub aroc: Option<f64>,
    pub apr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    /// Root attribute indices.
    pub attribute_set: AttributeSet,
    pub time_taken_s: f64,
    pub accuracy_pct: f64,
    pub classes: Vec<ClassMetrics>,
}

/// Cell counts of the one-vs-rest confusion matrix for a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_count: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy in percent and per-class confusion counts, pooled over folds.
/// The predicted class is the argmax of the scores, ties to the lowest index.
pub fn confusion_counts(preds: &FoldPredictions) -> (f64, Vec<Confusion>) {
    let c = preds.class_count;
    let mut cells = vec![Confusion::default(); c];
    let mut correct = 0u64;
    for i in 0..preds.len() {
        let actual = preds.classes[i] as usize;
        let predicted = preds.predicted(i);
        if actual == predicted {
            correct += 1;
        }
        for (k, cell) in cells.iter_mut().enumerate() {
            match (actual == k, predicted == k) {
                (true, true) => cell.tp += 1,
                (false, true) => cell.fp += 1,
                (true, false) => cell.fn_count += 1,
                (false, false) => cell.tn += 1,
            }
        }
    }
    let accuracy = if preds.is_empty() {
        0.0
    } else {
        100.0 * correct as f64 / preds.len() as f64
    };
    (accuracy, cells)
}

/// Accuracy and per-class rates without the curve areas.
pub fn confusion_rates(preds: &FoldPredictions) -> (f64, Vec<ClassMetrics>) {
    let (accuracy, cells) = confusion_counts(preds);
    let metrics = cells
        .iter()
        .map(|m| {
            let tp = ratio(m.tp, m.tp + m.fn_count);
            ClassMetrics {
                tp,
                fp: ratio(m.fp, m.fp + m.tn),
                fn_rate: ratio(m.fn_count, m.tp + m.fn_count),
                precision: ratio(m.tp, m.tp + m.fp).unwrap_or(0.0),
                recall: tp,
                aroc: None,
                apr: None,
            }
        })
        .collect();
    (accuracy, metrics)
}

/// The full metric record of a task.
pub fn evaluate(
    preds: &FoldPredictions,
    attribute_set: AttributeSet,
    time_taken_s: f64,
) -> Result<TaskResult, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::NoPredictions);
    }
    let (accuracy_pct, mut classes) = confusion_rates(preds);
    for (k, m) in classes.iter_mut().enumerate() {
        m.aroc = roc_auc(preds, k);
        m.apr = pr_auc(preds, k);
    }
    Ok(TaskResult {
        attribute_set,
        time_taken_s,
        accuracy_pct,
        classes,
    })
}
