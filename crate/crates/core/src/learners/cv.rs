//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;

use super::{argmax, score_column_row, train_rows, Columns, LearnerError, LearnerKind};
use crate::dataset::Dataset;
use crate::seed;

/// Held-out class scores for every row, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPredictions {
    pub class_count: usize,
    pub classes: Vec<u32>,
    pub folds: Vec<u32>,
    /// Row-major, `class_count` scores per row.
    pub scores: Vec<f64>,
}

impl FoldPredictions {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn score(&self, row: usize) -> &[f64] {
        &self.scores[row * self.class_count..(row + 1) * self.class_count]
    }

    pub fn predicted(&self, row: usize) -> usize {
        argmax(self.score(row))
    }

    /// Builds predictions from explicit parts; mainly for tests and tools.
    pub fn from_parts(class_count: usize, classes: Vec<u32>, scores: Vec<Vec<f64>>) -> Self {
        let folds = vec![0; classes.len()];
        FoldPredictions {
            class_count,
            classes,
            folds,
            scores: scores.into_iter().flatten().collect(),
        }
    }
}

/// Fold of every row. Within each class, in class order, rows are shuffled
/// and dealt round-robin; the dealing counter carries over between classes.
pub fn fold_assignment(classes: &[u32], class_count: usize, folds: usize, seed: u64) -> Result<Vec<u32>, LearnerError> {
    if folds < 2 {
        return Err(LearnerError::BadFolds(folds));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c as usize].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < folds {
            return Err(LearnerError::ClassTooSmall {
                class: c,
                count: rows.len(),
                folds,
            });
        }
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0u32; classes.len()];
    let mut next = 0usize;
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            assignment[r] = (next % folds) as u32;
            next += 1;
        }
    }
    Ok(assignment)
}

pub fn cross_validate_columns(
    cols: &Columns,
    learner: &LearnerKind,
    folds: usize,
    seed: u64,
) -> Result<FoldPredictions, LearnerError> {
    if cols.rows() == 0 {
        return Err(LearnerError::EmptyTraining);
    }
    let assignment = fold_assignment(&cols.classes, cols.class_count, folds, seed)?;
    let c = cols.class_count;
    let mut scores = vec![0.0; cols.rows() * c];
    for f in 0..folds as u32 {
        let train: Vec<u32> = (0..cols.rows() as u32)
            .filter(|&r| assignment[r as usize] != f)
            .collect();
        let model = train_rows(learner, cols, &train)?;
        for r in (0..cols.rows()).filter(|&r| assignment[r] == f) {
            scores[r * c..(r + 1) * c].copy_from_slice(&score_column_row(&model, cols, r));
        }
    }
    Ok(FoldPredictions {
        class_count: c,
        classes: cols.classes.clone(),
        folds: assignment,
        scores,
    })
}

pub fn cross_validate(
    ds: &Dataset,
    learner: &LearnerKind,
    folds: usize,
    seed: u64,
) -> Result<FoldPredictions, LearnerError> {
    cross_validate_columns(&Columns::from_dataset(ds), learner, folds, seed)
}
