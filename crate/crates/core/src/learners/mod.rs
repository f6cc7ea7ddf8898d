//! Classification objectives and cross-validation.

mod bayes;
mod columns;
mod cv;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bayes::NaiveBayesModel;
pub use columns::{Column, Columns};
pub use cv::{cross_validate, cross_validate_columns, fold_assignment, FoldPredictions};
pub use tree::{TreeModel, TreeParams};

use crate::dataset::{Cell, Dataset};
use crate::putmodel::PutModelError;
use columns::ColumnRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("training split has no rows")]
    EmptyTraining,
    #[error("row has {found} cells, model expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("class {class} has {count} rows, fewer than the {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("folds must be at least 2, got {0}")]
    BadFolds(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearnerKind {
    NaiveBayes,
    DecisionTree(TreeParams),
}

impl LearnerKind {
    pub fn tree() -> Self {
        LearnerKind::DecisionTree(TreeParams::default())
    }

    pub fn validate(&self) -> Result<(), PutModelError> {
        if let LearnerKind::DecisionTree(p) = self {
            if p.min_leaf < 1 {
                return Err(PutModelError::BadLearner("min_leaf must be at least 1".into()));
            }
            if !(p.confidence > 0.0 && p.confidence <= 0.5) {
                return Err(PutModelError::BadLearner(format!(
                    "confidence must be in (0, 0.5], got {}",
                    p.confidence
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::NaiveBayes => f.write_str("naive_bayes"),
            LearnerKind::DecisionTree(_) => f.write_str("tree"),
        }
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "naive_bayes" | "nb" | "bayes" | "naivebayes" => Ok(LearnerKind::NaiveBayes),
            "tree" | "decision_tree" | "c45" | "j48" => Ok(LearnerKind::tree()),
            other => Err(format!("unknown learner `{other}`")),
        }
    }
}

/// JSON accepts `"naive_bayes"`, `"tree"`, or `{"tree": {"min_leaf": 2, ...}}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LearnerDoc {
    Name(String),
    Tree { tree: TreeParams },
}

impl Serialize for LearnerKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LearnerKind::DecisionTree(p) if *p != TreeParams::default() => LearnerDoc::Tree { tree: *p }.serialize(s),
            other => LearnerDoc::Name(other.to_string()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LearnerKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match LearnerDoc::deserialize(d)? {
            LearnerDoc::Name(name) => name.parse().map_err(serde::de::Error::custom),
            LearnerDoc::Tree { tree } => Ok(LearnerKind::DecisionTree(tree)),
        }
    }
}

#[derive(Debug, Clone)]
enum ModelState {
    NaiveBayes(NaiveBayesModel),
    Tree(TreeModel),
}

/// A trained classifier over a fixed attribute layout.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    state: ModelState,
    class_count: usize,
    arity: usize,
    /// Root attribute index of each input position.
    pub provenance: Vec<u32>,
}

impl TrainedModel {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Class score vector for a row of the training layout; entries are
    /// non-negative and sum to 1.
    pub fn predict_scores(&self, cells: &[Cell]) -> Result<Vec<f64>, LearnerError> {
        if cells.len() != self.arity {
            return Err(LearnerError::Arity {
                expected: self.arity,
                found: cells.len(),
            });
        }
        Ok(self.scores_for(cells))
    }

    pub(crate) fn scores_for<I: columns::Instance + ?Sized>(&self, row: &I) -> Vec<f64> {
        match &self.state {
            ModelState::NaiveBayes(m) => m.scores(row),
            ModelState::Tree(m) => m.scores(row),
        }
    }

    pub fn as_tree(&self) -> Option<&TreeModel> {
        match &self.state {
            ModelState::Tree(t) => Some(t),
            ModelState::NaiveBayes(_) => None,
        }
    }
}

pub(crate) fn train_rows(learner: &LearnerKind, cols: &Columns, rows: &[u32]) -> Result<TrainedModel, LearnerError> {
    if rows.is_empty() {
        return Err(LearnerError::EmptyTraining);
    }
    let state = match learner {
        LearnerKind::NaiveBayes => ModelState::NaiveBayes(NaiveBayesModel::train(cols, rows)),
        LearnerKind::DecisionTree(p) => ModelState::Tree(TreeModel::train(cols, rows, p)),
    };
    Ok(TrainedModel {
        state,
        class_count: cols.class_count,
        arity: cols.width(),
        provenance: Vec::new(),
    })
}

pub fn train(learner: &LearnerKind, ds: &Dataset) -> Result<TrainedModel, LearnerError> {
    let cols = Columns::from_dataset(ds);
    let rows: Vec<u32> = (0..cols.rows() as u32).collect();
    let mut model = train_rows(learner, &cols, &rows)?;
    model.provenance = ds.provenance.clone();
    Ok(model)
}

pub fn train_naive_bayes(ds: &Dataset) -> Result<TrainedModel, LearnerError> {
    train(&LearnerKind::NaiveBayes, ds)
}

pub fn train_tree(ds: &Dataset, params: TreeParams) -> Result<TrainedModel, LearnerError> {
    train(&LearnerKind::DecisionTree(params), ds)
}

pub(crate) fn score_column_row(model: &TrainedModel, cols: &Columns, row: usize) -> Vec<f64> {
    model.scores_for(&ColumnRow { columns: cols, row })
}

/// Exponentiates log scores relative to their maximum and normalizes.
pub(crate) fn normalize_log_scores(mut log: Vec<f64>) -> Vec<f64> {
    let max = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in &mut log {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in &mut log {
        *l /= total;
    }
    log
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
