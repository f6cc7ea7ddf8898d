//! Parameter suggestion sized to a task and row budget.

use std::fmt;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::learners::{train_rows, Columns, LearnerKind};
use crate::putmodel::{binomial, resolve_partition_size, task_budget, GenerationMethod, PutConfig, SizeSpec};
use crate::seed;

const H_LADDER: [f64; 5] = [1.0, 0.5, 0.25, 0.1, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutopilotOptions {
    /// Largest task count a suggestion may lead to.
    pub task_cap: u64,
    /// Largest sampled row count a task should train on.
    pub row_cap: u64,
    /// Rows the timing probe trains on.
    pub probe_rows: u64,
    /// Time three trainings to estimate runtime. Without it the suggestion
    /// depends only on the dataset shape.
    pub probe: bool,
    /// Folds per task, each training one model.
    pub folds: usize,
    pub workers: Option<usize>,
}

impl Default for AutopilotOptions {
    fn default() -> Self {
        AutopilotOptions {
            task_cap: 10_000,
            row_cap: 50_000,
            probe_rows: 20_000,
            probe: true,
            folds: 5,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeClass {
    Seconds,
    Minutes,
    Hours,
    Days,
}

impl RuntimeClass {
    fn of(seconds: f64) -> Self {
        match seconds {
            s if s < 60.0 => RuntimeClass::Seconds,
            s if s < 3600.0 => RuntimeClass::Minutes,
            s if s < 86400.0 => RuntimeClass::Hours,
            _ => RuntimeClass::Days,
        }
    }
}

impl fmt::Display for RuntimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeClass::Seconds => "seconds",
            RuntimeClass::Minutes => "minutes",
            RuntimeClass::Hours => "hours",
            RuntimeClass::Days => "days",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutopilotSuggestion {
    pub partition_size: usize,
    pub vertical_expense: f64,
    pub horizontal_expense: f64,
    pub generation: GenerationMethod,
    pub workers: usize,
    pub estimated_tasks: u64,
    /// `C(n, k)` as a decimal string.
    pub candidates: String,
    pub sampled_rows: usize,
    pub estimated_seconds: Option<f64>,
    pub runtime_class: Option<RuntimeClass>,
    pub notes: Vec<String>,
}

impl AutopilotSuggestion {
    /// Copies the suggested expenses and generation method into `cfg`.
    pub fn apply(&self, cfg: &mut PutConfig) {
        cfg.vertical_expense = self.vertical_expense;
        cfg.horizontal_expense = self.horizontal_expense;
        cfg.generation = self.generation;
    }
}

/// The largest `v` whose budget `ceil(v * C(n, k))` stays within `cap`.
fn fit_vertical(n: usize, k: usize, cap: u64) -> f64 {
    if task_budget(n, k, 1.0, None).0 <= cap {
        return 1.0;
    }
    let total = binomial(n, k);
    let approx = cap as f64 / total.to_f64().unwrap_or(f64::INFINITY);
    let mut v = approx.min(1.0);
    while v > 0.0 && task_budget(n, k, v, None).0 > cap {
        v = v.next_down();
    }
    v
}

/// Suggests expenses, generation method and worker count for running
/// `size` on `ds` within the option caps.
pub fn autopilot(
    ds: &Dataset,
    size: SizeSpec,
    learner: &LearnerKind,
    options: &AutopilotOptions,
) -> Result<AutopilotSuggestion> {
    let (m, n) = (ds.m(), ds.n());
    let k = resolve_partition_size(size, n)?;
    let mut notes = Vec::new();

    let h = H_LADDER
        .into_iter()
        .find(|&h| m as f64 * h <= options.row_cap as f64)
        .unwrap_or(H_LADDER[H_LADDER.len() - 1]);
    let sampled_rows = crate::dataset::sample_size(m, h);
    if h < 1.0 {
        notes.push(format!(
            "h = {h}: {m} rows exceed the {} row cap, each task samples {sampled_rows} rows",
            options.row_cap
        ));
    } else {
        notes.push(format!("h = 1: all {m} rows fit the {} row cap", options.row_cap));
    }

    let v = fit_vertical(n, k, options.task_cap);
    let (budget, _) = task_budget(n, k, v, None);
    let candidates = binomial(n, k);
    if v < 1.0 {
        notes.push(format!(
            "v = {v:e}: C({n}, {k}) = {candidates} candidates exceed the {} task cap",
            options.task_cap
        ));
    } else {
        notes.push(format!("v = 1: all C({n}, {k}) = {candidates} sets fit the task cap"));
    }

    let generation = if candidates > BigUint::from(budget) * 10u32 {
        notes.push("random generation: the budget covers under a tenth of the candidates".into());
        GenerationMethod::Random
    } else {
        notes.push("dictionary generation: the budget covers a large share of the candidates".into());
        GenerationMethod::Dictionary
    };

    let workers = options
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
        .max(1);
    if ds.has_missing() {
        notes.push("dataset has missing values; learners skip them unless cleaning removes them".into());
    }

    let estimated_seconds = (options.probe && m > 0).then(|| {
        let per_training = probe_seconds(ds, learner, options.probe_rows);
        let probe_rows = crate::dataset::sample_size(m, (options.probe_rows as f64 / m as f64).min(1.0));
        let scale = sampled_rows as f64 / probe_rows.max(1) as f64 * k as f64 / n.max(1) as f64;
        per_training * options.folds as f64 * scale * budget as f64 / workers as f64
    });
    if let Some(s) = estimated_seconds {
        notes.push(format!("estimated runtime about {s:.0} s on {workers} workers"));
    }

    Ok(AutopilotSuggestion {
        partition_size: k,
        vertical_expense: v,
        horizontal_expense: h,
        generation,
        workers,
        estimated_tasks: budget,
        candidates: candidates.to_string(),
        sampled_rows,
        estimated_seconds,
        runtime_class: estimated_seconds.map(RuntimeClass::of),
        notes,
    })
}

/// Mean wall time of three trainings on all attributes, on fixed samples.
fn probe_seconds(ds: &Dataset, learner: &LearnerKind, probe_rows: u64) -> f64 {
    let h = (probe_rows as f64 / ds.m() as f64).min(1.0);
    let positions: Vec<usize> = (0..ds.n()).collect();
    let mut total = 0.0;
    for i in 0..3 {
        let Ok(rows) = ds.sample_indices(h, seed::derive(0, seed::PROBE_STREAM, i)) else {
            return 0.0;
        };
        let cols = Columns::select(ds, &positions, &rows);
        let all: Vec<u32> = (0..cols.rows() as u32).collect();
        let start = Instant::now();
        let _ = train_rows(learner, &cols, &all);
        total += start.elapsed().as_secs_f64();
    }
    total / 3.0
}
