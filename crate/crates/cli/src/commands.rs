use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::json;

use putwb_core::dataset::{self, CleanOptions};
use putwb_core::digest::sha256_hex;
use putwb_core::engine::{
    parse_dataset, read_results_csv, render_results_csv, resume_experiment, run_experiment, Checkpoint, DataFormat,
    EngineError, ExperimentSpec, ExperimentStatus, PreparedExperiment, RunObserver, RunOutcome, RunState, TaskFailure,
    TaskRecord,
};
use putwb_core::genset::PlanReport;
use putwb_core::metrics::SortCriteria;
use putwb_core::tools::{
    autopilot, recover, render_report_csv, select_top, verify, verify_results, AutopilotOptions, RecoverMode,
};
use putwb_core::{AttributeKind, Error, PutConfig, SizeSpec};
use putwb_server::{check_bind, serve_blocking, ServerConfig};

use crate::args::{AutopilotArgs, Command, InspectArgs, RecoverArgs, RunArgs, ServeArgs, VerifyArgs};
use crate::resolve::{
    apply_learner, build_spec, dataset_args_load, engage_autopilot, env_workers, parse_learner, read_set_file,
};
use crate::{control, sweep, Failure};

pub fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep::sweep(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Recover(a) => recover_cmd(a),
        Command::Autopilot(a) => autopilot_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Inspect(a) => inspect(a),
    }
}

/// Logs progress about every few seconds.
pub struct Progress {
    last: Instant,
    every: Duration,
}

impl Progress {
    pub fn new() -> Self {
        Progress {
            last: Instant::now(),
            every: Duration::from_secs(2),
        }
    }

    fn tick(&mut self, s: &ExperimentStatus) {
        if self.last.elapsed() >= self.every {
            self.last = Instant::now();
            let eta = s.eta_s.map(|e| format!(", about {e:.0} s left")).unwrap_or_default();
            log::info!("{}/{} tasks, {} failed{eta}", s.done, s.total, s.failed);
        }
    }
}

impl RunObserver for Progress {
    fn started(&mut self, s: &ExperimentStatus, report: &PlanReport) {
        log::info!(
            "{} tasks planned of {} candidates ({} done)",
            report.planned,
            report.candidates,
            s.done
        );
        if report.priority_scan_capped {
            log::warn!("utility exception scan hit its cap; some boosted sets may be missing");
        }
        if report.dedup_abandoned {
            log::warn!("random generation stopped tracking duplicates; a few sets may repeat");
        }
    }

    fn committed(&mut self, _: &TaskRecord, s: &ExperimentStatus) {
        self.tick(s);
    }

    fn failed(&mut self, f: &TaskFailure, s: &ExperimentStatus) {
        log::warn!("task {} {} failed: {}", f.index, f.attribute_set, f.error);
        self.tick(s);
    }

    fn checkpointed(&mut self, path: &Path, c: &Checkpoint) {
        log::debug!("checkpoint {} at {} tasks", path.display(), c.results.len());
    }
}

/// Turns a finished outcome into success, or into the interrupt exit when
/// a signal cancelled the run.
fn finish(outcome: &RunOutcome) -> Result<(), Failure> {
    let s = &outcome.status;
    match s.state {
        RunState::Completed => {
            log::info!(
                "completed {} tasks, {} failed, in {:.1} s",
                s.done,
                s.failed,
                s.elapsed_s
            );
            match &outcome.output {
                Some(p) => log::info!("results in {}", p.display()),
                None => {
                    let csv = render_results_csv(&outcome.task_results(), outcome.class_count);
                    std::io::stdout()
                        .write_all(csv.as_bytes())
                        .map_err(|e| Failure::Runtime(format!("stdout: {e}")))?;
                }
            }
            Ok(())
        }
        RunState::Cancelled => {
            match &outcome.checkpoint {
                Some(c) => eprintln!(
                    "stopped after {} of {} tasks; continue with `putwb recover --resume {}`",
                    s.done,
                    s.total,
                    c.display()
                ),
                None => eprintln!(
                    "stopped after {} of {} tasks; no checkpoint without --out",
                    s.done, s.total
                ),
            }
            Err(Failure::Interrupted)
        }
        other => Err(Failure::Runtime(format!(
            "run ended in state {other:?}{}",
            s.last_error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
        ))),
    }
}

/// Prepares and runs `spec` under the process control.
pub fn execute(spec: ExperimentSpec) -> Result<RunOutcome, Failure> {
    let prep = PreparedExperiment::load(spec)?;
    let r = &prep.clean_report;
    if r.rows_in != r.rows_out {
        log::info!("cleaning kept {} of {} rows", r.rows_out, r.rows_in);
    }
    Ok(run_experiment(&prep, &control(), &mut Progress::new())?)
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let size = match (a.partition_size, a.put_number) {
        (Some(k), None) => Some(SizeSpec::PartitionSize(k)),
        (None, Some(p)) => Some(SizeSpec::PutNumber(p)),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(Failure::Usage("--partition-size and --put-number are exclusive".into())),
    };
    let mut spec = build_spec(size, &a.experiment)?;
    if a.experiment.print_spec {
        println!("{}", spec.to_json());
        return Ok(());
    }
    engage_autopilot(&mut spec, &a.experiment)?;
    finish(&execute(spec)?)
}

fn workers_or_env(w: Option<usize>) -> Result<usize, Failure> {
    let w = match w {
        Some(w) => Some(w),
        None => env_workers()?,
    };
    Ok(
        w.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1),
    )
}

fn verify_cmd(a: VerifyArgs) -> Result<(), Failure> {
    let (ds, _) = dataset_args_load(&a.data)?;
    let mut cfg = PutConfig::new(SizeSpec::PartitionSize(1), parse_learner("tree")?);
    apply_learner(&mut cfg, &a.learner)?;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let workers = workers_or_env(a.workers)?;
    let report = match (&a.sets, &a.sets_file, &a.results) {
        (None, None, None) => return Err(Failure::Usage("give --sets, --sets-file or --results".into())),
        (_, _, Some(path)) if a.sets.is_some() || a.sets_file.is_some() => {
            return Err(Failure::Usage(format!(
                "--results {} cannot be combined with --sets or --sets-file",
                path.display()
            )))
        }
        (_, _, Some(path)) => {
            let rows = read_results_csv(path)?;
            let criteria = match &a.sort {
                Some(s) => s.parse::<SortCriteria>().map_err(|e| Failure::Usage(e.to_string()))?,
                None => SortCriteria::default(),
            };
            let top = select_top(&rows, &criteria, a.top.unwrap_or(rows.len()));
            log::info!("verifying the top {} of {} experiment rows", top.len(), rows.len());
            verify_results(&ds, &cfg, &top, workers)?
        }
        (literal, file, None) => {
            let mut sets = match literal {
                Some(s) => putwb_core::putmodel::parse_set_list(s).map_err(|e| Failure::Usage(e.to_string()))?,
                None => Vec::new(),
            };
            if let Some(f) = file {
                sets.extend(read_set_file(f)?);
            }
            log::info!("verifying {} sets", sets.len());
            verify(&ds, &cfg, &sets, workers)?
        }
    };
    for (set, e) in &report.failures {
        log::warn!("{set} failed: {e}");
    }
    putwb_core::engine::write_atomic(&a.out, render_report_csv(&report).as_bytes())?;
    log::info!("{} sets verified, report in {}", report.rows.len(), a.out.display());
    if report.rows.is_empty() {
        return Err(Failure::Runtime("every set failed".into()));
    }
    Ok(())
}

fn recover_cmd(a: RecoverArgs) -> Result<(), Failure> {
    let ctl = control();
    let mut progress = Progress::new();
    let outcome = match (&a.dump, a.out.is_some() || a.workers.is_some()) {
        (Some(output), _) => recover(
            &a.checkpoint,
            &RecoverMode::Dump { output: output.clone() },
            &ctl,
            &mut progress,
        )?,
        (None, false) => recover(&a.checkpoint, &RecoverMode::Resume, &ctl, &mut progress)?,
        (None, true) => {
            if !a.checkpoint.is_file() {
                return Err(Error::from(putwb_core::tools::ToolsError::FileNotFound(a.checkpoint.clone())).into());
            }
            let mut spec = Checkpoint::load(&a.checkpoint)?.spec;
            if let Some(o) = &a.out {
                spec.output = Some(o.clone());
            }
            if a.workers.is_some() {
                spec.workers = a.workers;
            }
            resume_experiment(&a.checkpoint, Some(&spec), &ctl, &mut progress)?
        }
    };
    if outcome.status.state == RunState::Recovered {
        log::info!(
            "wrote {} results to {}",
            outcome.results.len(),
            a.dump.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        return Ok(());
    }
    finish(&outcome)
}

fn autopilot_cmd(a: AutopilotArgs) -> Result<(), Failure> {
    let (ds, _) = dataset_args_load(&a.data)?;
    let size = match (a.partition_size, a.put_number) {
        (Some(k), _) => SizeSpec::PartitionSize(k),
        (None, Some(p)) => SizeSpec::PutNumber(p),
        (None, None) => {
            return Err(Failure::Usage(
                "one of --partition-size or --put-number is required".into(),
            ))
        }
    };
    let defaults = AutopilotOptions::default();
    let options = AutopilotOptions {
        task_cap: a.task_cap.unwrap_or(defaults.task_cap),
        row_cap: a.row_cap.unwrap_or(defaults.row_cap),
        probe: !a.no_probe,
        workers: Some(workers_or_env(a.workers)?),
        ..defaults
    };
    let learner = parse_learner(&a.learner)?;
    let s = autopilot(&ds, size, &learner, &options)?;
    for note in &s.notes {
        log::info!("{note}");
    }
    println!("{}", serde_json::to_string_pretty(&s).expect("suggestion serializes"));
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    check_bind(&a.bind, a.token.as_deref()).map_err(Failure::Usage)?;
    let defaults = ServerConfig::default();
    let config = ServerConfig {
        max_body_bytes: a.max_body.unwrap_or(defaults.max_body_bytes),
        token: a.token.filter(|t| !t.is_empty()),
        static_dir: a.static_dir,
        workers: match a.workers {
            Some(w) => Some(w),
            None => env_workers()?,
        },
    };
    serve_blocking(a.bind, config).map_err(|e| Failure::Runtime(format!("server on {}: {e}", a.bind)))
}

fn inspect(a: InspectArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&a.path).map_err(|e| Failure::Data(format!("{}: {e}", a.path.display())))?;
    let doc = match Checkpoint::from_bytes(&bytes) {
        Ok(c) => json!({
            "kind": "checkpoint",
            "state": c.state,
            "spec": c.spec,
            "spec_digest": c.spec_digest,
            "next_index": c.next_index,
            "committed": c.results.len(),
            "failed": c.failures.len(),
            "class_count": c.class_count,
            "report": c.report,
            "elapsed_s": c.elapsed_s,
        }),
        Err(EngineError::NotACheckpoint) => inspect_dataset(&a, &bytes)?,
        Err(e) => return Err(Error::from(e).into()),
    };
    println!("{}", serde_json::to_string_pretty(&doc).expect("json serializes"));
    Ok(())
}

fn inspect_dataset(a: &InspectArgs, bytes: &[u8]) -> Result<serde_json::Value, Failure> {
    let format = a
        .format
        .map(Into::into)
        .unwrap_or_else(|| DataFormat::from_path(&a.path));
    let name = a
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = parse_dataset(bytes, Some(format), a.class.as_deref(), &name)?;
    let attributes: Vec<_> = ds
        .attributes
        .iter()
        .enumerate()
        .map(|(i, attr)| {
            let missing = ds.rows.iter().filter(|r| r.cells[i].is_missing()).count();
            let kind = match &attr.kind {
                AttributeKind::Numeric => json!("numeric"),
                AttributeKind::Nominal(labels) => json!({ "nominal": labels }),
            };
            json!({ "index": attr.index, "name": attr.name, "kind": kind, "missing": missing })
        })
        .collect();
    let mut doc = json!({
        "kind": "dataset",
        "name": ds.source_name,
        "digest": sha256_hex(bytes),
        "format": format,
        "n": ds.n(),
        "m": ds.m(),
        "class": {
            "name": ds.class.name,
            "labels": ds.class.labels,
            "histogram": ds.class_histogram(),
        },
        "attributes": attributes,
        "has_missing": ds.has_missing(),
        "violations": dataset::validate(&ds),
    });
    if a.missing.is_some() || a.dedupe.is_some() {
        let options = CleanOptions {
            missing: a.missing.map(Into::into).unwrap_or_default(),
            dedupe: a.dedupe.map(Into::into).unwrap_or_default(),
        };
        doc["clean"] = match dataset::clean(&ds, options) {
            Ok((_, report)) => serde_json::to_value(report).expect("report serializes"),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    Ok(doc)
}
