//! Naive Bayes with Laplace-smoothed nominal likelihoods and per-class
//! Gaussians for numeric attributes.

use super::columns::{Column, Columns, Instance, Value, MISSING};
use super::normalize_log_scores;

const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
enum AttributeModel {
    /// `log P(value | class)`, indexed `[class][value]`.
    Nominal(Vec<Vec<f64>>),
    /// Per-class `(mean, variance)`.
    Gaussian(Vec<(f64, f64)>),
    /// No known values in training; contributes nothing.
    Ignored,
}

#[derive(Debug, Clone)]
pub struct NaiveBayesModel {
    log_priors: Vec<f64>,
    attributes: Vec<AttributeModel>,
}

/// Mean and population variance of `values`, summed in sorted order so the
/// result does not depend on row order.
fn moments(values: &mut [f64]) -> (f64, f64) {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_unstable_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).max(VARIANCE_FLOOR))
}

impl NaiveBayesModel {
    pub fn train(cols: &Columns, rows: &[u32]) -> Self {
        let c = cols.class_count;
        let mut class_counts = vec![0usize; c];
        for &r in rows {
            class_counts[cols.classes[r as usize] as usize] += 1;
        }
        let total = rows.len() as f64;
        let log_priors = class_counts
            .iter()
            .map(|&n| ((n as f64 + 1.0) / (total + c as f64)).ln())
            .collect();

        let attributes = cols
            .columns
            .iter()
            .map(|col| match col {
                Column::Nominal { values, arity } => {
                    let v = *arity as usize;
                    let mut counts = vec![vec![0usize; v]; c];
                    for &r in rows {
                        let x = values[r as usize];
                        if x != MISSING {
                            counts[cols.classes[r as usize] as usize][x as usize] += 1;
                        }
                    }
                    let table = counts
                        .iter()
                        .map(|per_value| {
                            let known: usize = per_value.iter().sum();
                            let denom = (known + v) as f64;
                            per_value.iter().map(|&k| ((k as f64 + 1.0) / denom).ln()).collect()
                        })
                        .collect();
                    AttributeModel::Nominal(table)
                }
                Column::Numeric { values } => {
                    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); c];
                    for &r in rows {
                        let x = values[r as usize];
                        if !x.is_nan() {
                            per_class[cols.classes[r as usize] as usize].push(x);
                        }
                    }
                    let mut all: Vec<f64> = per_class.iter().flatten().copied().collect();
                    if all.is_empty() {
                        return AttributeModel::Ignored;
                    }
                    let global = moments(&mut all);
                    let params = per_class
                        .iter_mut()
                        .map(|v| if v.is_empty() { global } else { moments(v) })
                        .collect();
                    AttributeModel::Gaussian(params)
                }
            })
            .collect();
        NaiveBayesModel { log_priors, attributes }
    }

    pub(crate) fn scores<I: Instance + ?Sized>(&self, row: &I) -> Vec<f64> {
        let mut log = self.log_priors.clone();
        for (a, model) in self.attributes.iter().enumerate() {
            match (model, row.value(a)) {
                (_, Value::Missing) | (AttributeModel::Ignored, _) => {}
                (AttributeModel::Nominal(table), Value::Nominal(x)) => {
                    for (c, l) in log.iter_mut().enumerate() {
                        // Labels outside the training arity get the
                        // smoothing mass of an unseen value.
                        *l += table[c].get(x as usize).copied().unwrap_or_else(|| {
                            let v = table[c].len() as f64;
                            -(v + 1.0).ln()
                        });
                    }
                }
                (AttributeModel::Gaussian(params), Value::Numeric(x)) => {
                    for (l, &(mean, var)) in log.iter_mut().zip(params) {
                        *l += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var);
                    }
                }
                // Kind mismatch cannot arise from a dataset's own rows.
                _ => {}
            }
        }
        normalize_log_scores(log)
    }
}
