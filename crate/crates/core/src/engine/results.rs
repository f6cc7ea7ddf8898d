//! Result table in CSV form: one row per evaluated set, in task order.

use std::fmt::Write as _;
use std::path::Path;

use super::checkpoint::write_atomic;
use crate::error::{Error, Result};
use crate::metrics::{ClassField, ClassMetrics, TaskResult};
use crate::putmodel::AttributeSet;

pub fn header(class_count: usize) -> Vec<String> {
    let mut cols = vec!["attribute_set".to_string(), "time_taken".into(), "accuracy".into()];
    for i in 0..class_count {
        cols.extend(ClassField::ALL.iter().map(|f| format!("{}_{i}", f.name())));
    }
    cols
}

fn num(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v:.5}").unwrap();
    }
}

/// Renders the table. Numbers have five decimals; undefined values are
/// empty fields.
pub fn render_results_csv(results: &[TaskResult], class_count: usize) -> String {
    let mut out = header(class_count).join(",");
    out.push('\n');
    for r in results {
        write!(out, "\"{}\"", r.attribute_set).unwrap();
        num(&mut out, Some(r.time_taken_s));
        num(&mut out, Some(r.accuracy_pct));
        for m in &r.classes {
            num(&mut out, m.tp);
            num(&mut out, m.fp);
            num(&mut out, m.fn_rate);
            num(&mut out, Some(m.precision));
            num(&mut out, m.recall);
            num(&mut out, m.aroc);
            num(&mut out, m.apr);
        }
        out.push('\n');
    }
    out
}

pub fn write_results_csv(path: &Path, results: &[TaskResult], class_count: usize) -> Result<()> {
    write_atomic(path, render_results_csv(results, class_count).as_bytes())
}

fn bad(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("results csv line {line}: {msg}"))
}

/// Reads a table written by [`render_results_csv`]. Values carry the
/// five-decimal precision of the file.
pub fn parse_results_csv(bytes: &[u8]) -> Result<Vec<TaskResult>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let head: Vec<String> = reader
        .headers()
        .map_err(|e| bad(1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if head.len() < 3 || !(head.len() - 3).is_multiple_of(7) || head[..3] != header(0)[..] {
        return Err(bad(1, "not a result table header"));
    }
    let class_count = (head.len() - 3) / 7;
    if head != header(class_count) {
        return Err(bad(1, "not a result table header"));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(line, e))?;
        let opt = |j: usize| -> Result<Option<f64>> {
            let s = rec.get(j).unwrap_or("").trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| bad(line, format!("`{s}` is not a number")))
            }
        };
        let req = |j: usize| -> Result<f64> { opt(j)?.ok_or_else(|| bad(line, format!("empty `{}`", head[j]))) };
        let attribute_set: AttributeSet = rec.get(0).unwrap_or("").parse().map_err(|e| bad(line, e))?;
        let mut classes = Vec::with_capacity(class_count);
        for c in 0..class_count {
            let b = 3 + 7 * c;
            classes.push(ClassMetrics {
                tp: opt(b)?,
                fp: opt(b + 1)?,
                fn_rate: opt(b + 2)?,
                precision: req(b + 3)?,
                recall: opt(b + 4)?,
                aroc: opt(b + 5)?,
                apr: opt(b + 6)?,
            });
        }
        out.push(TaskResult {
            attribute_set,
            time_taken_s: req(1)?,
            accuracy_pct: req(2)?,
            classes,
        });
    }
    Ok(out)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<TaskResult>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_results_csv(&bytes)
}
