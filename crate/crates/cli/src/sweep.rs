//! One experiment per partition size or PUT number, run in sequence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use putwb_core::engine::{header, write_atomic};
use putwb_core::metrics::{SortCriteria, TaskResult};
use putwb_core::SizeSpec;

use crate::args::{ExperimentArgs, SweepArgs};
use crate::commands::execute;
use crate::resolve::{build_spec, engage_autopilot};
use crate::Failure;

/// `a..b` (inclusive, also `a..=b`) or a comma list.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let bad = |t: &str| format!("`{t}` is not a partition size");
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad(a))?;
        let b: usize = b.trim().parse().map_err(|_| bad(b))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| bad(t)))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(format!("size range `{s}` is empty"));
    }
    if values.contains(&0) {
        return Err("partition sizes start at 1".into());
    }
    Ok(values)
}

/// `start:end:step` (inclusive of `end` when the steps land on it) or a
/// comma list.
pub fn parse_put_numbers(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a PUT number"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values: Vec<f64> = if parts.len() == 3 {
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 || !step.is_finite() {
            return Err(format!("step {step} must be positive"));
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = ((start + f64::from(i) * step) * 1e9).round() / 1e9;
            if v > end + 1e-9 {
                break;
            }
            out.push(v);
            i += 1;
        }
        out
    } else if parts.len() == 1 {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(num)
            .collect::<Result<_, _>>()?
    } else {
        return Err(format!("`{s}` is neither start:end:step nor a list"));
    };
    if values.is_empty() {
        return Err(format!("PUT number range `{s}` is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(format!("PUT number {v} is outside [-1, 1]"));
    }
    Ok(values)
}

fn label(size: SizeSpec) -> String {
    match size {
        SizeSpec::PartitionSize(k) => k.to_string(),
        SizeSpec::PutNumber(p) => format!("{p}"),
    }
}

/// `r.csv` with value `3` becomes `r_3.csv`.
fn suffixed(path: &Path, value: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{value}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{value}"),
    };
    path.with_file_name(name)
}

struct Entry {
    value: String,
    partition_size: Option<usize>,
    tasks: usize,
    failed: usize,
    best: Option<TaskResult>,
    error: Option<String>,
}

fn run_one(
    size: SizeSpec,
    a: &ExperimentArgs,
    base_out: &Path,
    base_ckpt: Option<&Path>,
    criteria: &SortCriteria,
) -> Result<Entry, Failure> {
    let value = label(size);
    let mut spec = build_spec(Some(size), a)?;
    spec.output = Some(suffixed(base_out, &value));
    spec.checkpoint = base_ckpt.map(|c| suffixed(c, &value));
    engage_autopilot(&mut spec, a)?;
    let path = spec.dataset.path.clone();
    log::info!("sweep value {value}: {}", path.display());
    let outcome = execute(spec)?;
    if outcome.status.state != putwb_core::engine::RunState::Completed {
        return Err(match outcome.status.state {
            putwb_core::engine::RunState::Cancelled => Failure::Interrupted,
            s => Failure::Runtime(format!("ended in state {s:?}")),
        });
    }
    let results = outcome.task_results();
    let best = results.iter().min_by(|x, y| criteria.compare(x, y)).cloned();
    Ok(Entry {
        value,
        partition_size: best.as_ref().map(|b| b.attribute_set.len()),
        tasks: results.len(),
        failed: outcome.failures.len(),
        best,
        error: None,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_summary(entries: &[Entry], class_count: usize) -> String {
    let mut out = String::from("value,partition_size,tasks,failed,error,");
    out.push_str(&header(class_count).join(","));
    out.push('\n');
    for e in entries {
        write!(
            out,
            "{},{},{},{},{},",
            e.value,
            e.partition_size.map(|k| k.to_string()).unwrap_or_default(),
            e.tasks,
            e.failed,
            csv_field(e.error.as_deref().unwrap_or(""))
        )
        .unwrap();
        match &e.best {
            Some(b) => {
                let rendered = putwb_core::engine::render_results_csv(std::slice::from_ref(b), class_count);
                out.push_str(rendered.lines().nth(1).unwrap_or(""));
            }
            None => out.push_str(&vec![""; header(class_count).len()].join(",")),
        }
        out.push('\n');
    }
    out
}

pub fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let sizes: Vec<SizeSpec> = match (&a.sizes, &a.put_numbers) {
        (Some(s), None) => parse_sizes(s)
            .map_err(Failure::Usage)?
            .into_iter()
            .map(SizeSpec::PartitionSize)
            .collect(),
        (None, Some(p)) => parse_put_numbers(p)
            .map_err(Failure::Usage)?
            .into_iter()
            .map(SizeSpec::PutNumber)
            .collect(),
        _ => return Err(Failure::Usage("give exactly one of --sizes or --put-numbers".into())),
    };
    let criteria: SortCriteria = a
        .sort
        .parse()
        .map_err(|e: putwb_core::metrics::MetricsError| Failure::Usage(e.to_string()))?;
    // Resolve once up front so flag mistakes stop the sweep before any run.
    let base = build_spec(Some(sizes[0]), &a.experiment)?;
    let base_out = base
        .output
        .clone()
        .ok_or_else(|| Failure::Usage("sweep needs --out (or `output` in the spec) to name its files".into()))?;
    let base_ckpt = base.checkpoint.clone();
    if a.experiment.print_spec {
        println!("{}", base.to_json());
        return Ok(());
    }
    let summary_path = a.summary.clone().unwrap_or_else(|| suffixed(&base_out, "summary"));

    let mut entries = Vec::new();
    let mut class_count = None;
    for &size in &sizes {
        match run_one(size, &a.experiment, &base_out, base_ckpt.as_deref(), &criteria) {
            Ok(e) => {
                if class_count.is_none() {
                    class_count = e.best.as_ref().map(|b| b.classes.len());
                }
                entries.push(e);
            }
            Err(Failure::Interrupted) => return Err(Failure::Interrupted),
            Err(f) => {
                let msg = match &f {
                    Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m.clone(),
                    Failure::Interrupted => unreachable!(),
                };
                log::warn!("sweep value {} failed: {msg}", label(size));
                entries.push(Entry {
                    value: label(size),
                    partition_size: None,
                    tasks: 0,
                    failed: 0,
                    best: None,
                    error: Some(msg),
                });
            }
        }
    }
    let class_count = class_count.unwrap_or(0);
    write_atomic(&summary_path, render_summary(&entries, class_count).as_bytes()).map_err(Failure::from)?;
    let failures = entries.iter().filter(|e| e.error.is_some()).count();
    log::info!(
        "sweep of {} values done, summary in {}",
        entries.len(),
        summary_path.display()
    );
    if failures > 0 {
        return Err(Failure::Runtime(format!(
            "{failures} of {} sweep values failed",
            entries.len()
        )));
    }
    Ok(())
}
