//! The run loop: generator thread, worker pool and in-order collector.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, RecvTimeoutError};

use super::{
    write_results_csv, Checkpoint, Control, ControlSignal, EngineError, ExperimentSpec, ExperimentStatus,
    PreparedExperiment, RunState, TaskFailure, TaskRecord,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::genset::{GeneratorCursor, GensetError, PlanReport, PlanStream};
use crate::learners::{cross_validate_columns, Columns};
use crate::metrics::{evaluate, TaskResult};
use crate::putmodel::{AttributeSet, PutConfig, PutModelError};
use crate::seed;

/// Scores one attribute set.
pub trait TaskEvaluator: Sync {
    fn evaluate(
        &self,
        ds: &Dataset,
        cfg: &PutConfig,
        set: &AttributeSet,
        index: u64,
        record_timing: bool,
    ) -> Result<TaskResult>;
}

/// Cross-validated evaluation of the configured learner.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossValidation;

impl TaskEvaluator for CrossValidation {
    fn evaluate(
        &self,
        ds: &Dataset,
        cfg: &PutConfig,
        set: &AttributeSet,
        index: u64,
        record_timing: bool,
    ) -> Result<TaskResult> {
        evaluate_set(ds, cfg, set, index, record_timing)
    }
}

/// Evaluates `set` on the rows sampled for task `index`. Fold assignment
/// depends only on the config seed, so equal samples give equal folds.
pub fn evaluate_set(
    ds: &Dataset,
    cfg: &PutConfig,
    set: &AttributeSet,
    index: u64,
    record_timing: bool,
) -> Result<TaskResult> {
    if set.max_index() as usize > ds.n() {
        return Err(PutModelError::OutOfRange {
            k: set.max_index() as usize,
            n: ds.n(),
        }
        .into());
    }
    let start = Instant::now();
    let rows = ds.sample_indices(
        cfg.horizontal_expense,
        seed::derive(cfg.seed, seed::SAMPLE_STREAM, index),
    )?;
    let positions: Vec<usize> = set.iter().map(|i| i as usize - 1).collect();
    let cols = Columns::select(ds, &positions, &rows);
    let preds = cross_validate_columns(
        &cols,
        &cfg.learner,
        cfg.folds,
        seed::derive(cfg.seed, seed::FOLD_STREAM, 0),
    )?;
    let elapsed = if record_timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(evaluate(&preds, set.clone(), elapsed)?)
}

fn guarded<E: TaskEvaluator + ?Sized>(
    evaluator: &E,
    ds: &Dataset,
    cfg: &PutConfig,
    set: &AttributeSet,
    index: u64,
    record_timing: bool,
) -> Result<TaskResult, String> {
    match panic::catch_unwind(AssertUnwindSafe(|| {
        evaluator.evaluate(ds, cfg, set, index, record_timing)
    })) {
        Ok(Ok(r)) => Ok(r),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(match p.downcast_ref::<&str>() {
            Some(s) => format!("evaluation panicked: {s}"),
            None => match p.downcast_ref::<String>() {
                Some(s) => format!("evaluation panicked: {s}"),
                None => "evaluation panicked".into(),
            },
        }),
    }
}

/// Evaluates a fixed list of sets on `workers` threads. Entry `i` belongs
/// to `sets[i]` and is evaluated as task `i`; a cancelled control leaves
/// the remaining entries `None`.
pub fn evaluate_sets(
    ds: &Dataset,
    cfg: &PutConfig,
    sets: &[AttributeSet],
    workers: usize,
    record_timing: bool,
    control: &Control,
) -> Vec<Option<Result<TaskResult, String>>> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<Result<TaskResult, String>>>> = Mutex::new(vec![None; sets.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, sets.len().max(1)) {
            s.spawn(|| loop {
                if control.wait_while_paused() == ControlSignal::Cancel {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= sets.len() {
                    break;
                }
                let r = guarded(&CrossValidation, ds, cfg, &sets[i], i as u64, record_timing);
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap()
}

/// Callbacks from the collector, on the thread that called the run.
pub trait RunObserver {
    fn started(&mut self, _status: &ExperimentStatus, _report: &PlanReport) {}
    fn committed(&mut self, _record: &TaskRecord, _status: &ExperimentStatus) {}
    fn failed(&mut self, _failure: &TaskFailure, _status: &ExperimentStatus) {}
    fn state_changed(&mut self, _status: &ExperimentStatus) {}
    fn checkpointed(&mut self, _path: &Path, _checkpoint: &Checkpoint) {}
}

#[derive(Debug, Default)]
pub struct NoObserver;

impl RunObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExperimentStatus,
    pub class_count: usize,
    pub results: Vec<TaskRecord>,
    pub failures: Vec<TaskFailure>,
    pub report: PlanReport,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl RunOutcome {
    pub fn task_results(&self) -> Vec<TaskResult> {
        self.results.iter().map(|r| r.result.clone()).collect()
    }
}

struct Job {
    index: u64,
    set: AttributeSet,
    cursor: GeneratorCursor,
}

struct Done {
    job: Job,
    outcome: Result<TaskResult, String>,
}

/// Collector-side state of a run.
struct Progress<'a> {
    prep: &'a PreparedExperiment,
    checkpoint_path: Option<PathBuf>,
    results: Vec<TaskRecord>,
    failures: Vec<TaskFailure>,
    cursor: GeneratorCursor,
    next_index: u64,
    elapsed_before: f64,
    started: Instant,
    session_done: u64,
    last_error: Option<String>,
}

impl Progress<'_> {
    fn elapsed(&self) -> f64 {
        self.elapsed_before + self.started.elapsed().as_secs_f64()
    }

    fn total(&self) -> u64 {
        self.cursor.report().planned
    }

    fn status(&self, state: RunState) -> ExperimentStatus {
        let done = self.next_index;
        let total = if state == RunState::Completed {
            done
        } else {
            self.total().max(done)
        };
        let session = self.started.elapsed().as_secs_f64();
        let eta_s = (self.session_done > 0 && state == RunState::Running)
            .then(|| session / self.session_done as f64 * (total - done) as f64);
        ExperimentStatus {
            state,
            done,
            total,
            failed: self.failures.len() as u64,
            elapsed_s: self.elapsed(),
            eta_s,
            last_error: self.last_error.clone(),
        }
    }

    fn checkpoint(&self, state: RunState) -> Checkpoint {
        Checkpoint {
            spec: self.prep.spec.clone(),
            spec_digest: self.prep.spec_digest.clone(),
            state,
            cursor: self.cursor.clone(),
            next_index: self.next_index,
            class_count: self.prep.dataset.class_count(),
            results: self.results.clone(),
            failures: self.failures.clone(),
            report: self.cursor.report().clone(),
            elapsed_s: self.elapsed(),
        }
    }

    fn save(&self, state: RunState, observer: &mut dyn RunObserver) -> Result<()> {
        if let Some(path) = &self.checkpoint_path {
            let ckpt = self.checkpoint(state);
            ckpt.save(path)?;
            log::debug!("checkpoint written: {} tasks, {}", self.next_index, path.display());
            observer.checkpointed(path, &ckpt);
        }
        Ok(())
    }
}

/// Runs an experiment from the start with the default evaluator.
pub fn run_experiment(
    prep: &PreparedExperiment,
    control: &Control,
    observer: &mut dyn RunObserver,
) -> Result<RunOutcome> {
    run_with(prep, control, &CrossValidation, observer, None)
}

/// Loads the checkpoint at `path`, re-reads the dataset it names and runs
/// the remaining tasks. `spec_override` may only change output paths, the
/// worker count and the checkpoint interval.
pub fn resume_experiment(
    path: &Path,
    spec_override: Option<&ExperimentSpec>,
    control: &Control,
    observer: &mut dyn RunObserver,
) -> Result<RunOutcome> {
    resume_with(path, spec_override, control, &CrossValidation, observer)
}

pub fn resume_with<E: TaskEvaluator + ?Sized>(
    path: &Path,
    spec_override: Option<&ExperimentSpec>,
    control: &Control,
    evaluator: &E,
    observer: &mut dyn RunObserver,
) -> Result<RunOutcome> {
    let ckpt = Checkpoint::load(path)?;
    let mut spec = ckpt.spec.clone();
    if let Some(o) = spec_override {
        let mut same = o.clone();
        if same.dataset.digest.is_none() {
            same.dataset.digest = spec.dataset.digest.clone();
        }
        if same.digest() != ckpt.spec_digest {
            return Err(EngineError::DigestMismatch {
                expected: ckpt.spec_digest.clone(),
                found: same.digest(),
            }
            .into());
        }
        spec.output = o.output.clone();
        spec.workers = o.workers;
        spec.checkpoint_interval = o.checkpoint_interval;
    }
    if spec.checkpoint.is_none() && spec.checkpoint_path().as_deref() != Some(path) {
        spec.checkpoint = Some(path.to_path_buf());
    }
    let prep = PreparedExperiment::load(spec)?;
    run_with(&prep, control, evaluator, observer, Some(ckpt))
}

/// Writes the results held in a checkpoint to `output`.
pub fn dump(ckpt: &Checkpoint, output: &Path) -> Result<RunOutcome> {
    let results: Vec<TaskResult> = ckpt.results.iter().map(|r| r.result.clone()).collect();
    write_results_csv(output, &results, ckpt.class_count)?;
    Ok(RunOutcome {
        status: ExperimentStatus {
            state: RunState::Recovered,
            done: ckpt.next_index,
            total: ckpt.report.planned.max(ckpt.next_index),
            failed: ckpt.failures.len() as u64,
            elapsed_s: ckpt.elapsed_s,
            eta_s: None,
            last_error: ckpt.failures.last().map(|f| f.error.clone()),
        },
        class_count: ckpt.class_count,
        results: ckpt.results.clone(),
        failures: ckpt.failures.clone(),
        report: ckpt.report.clone(),
        output: Some(output.to_path_buf()),
        checkpoint: None,
    })
}

/// Runs `prep`, continuing from `resume` when given.
pub fn run_with<E: TaskEvaluator + ?Sized>(
    prep: &PreparedExperiment,
    control: &Control,
    evaluator: &E,
    observer: &mut dyn RunObserver,
    resume: Option<Checkpoint>,
) -> Result<RunOutcome> {
    let plan = prep.plan.clone();
    let (stream, mut progress) = match resume {
        None => {
            let stream = PlanStream::new(plan)?;
            let cursor = stream.cursor();
            (
                stream,
                Progress {
                    prep,
                    checkpoint_path: prep.spec.checkpoint_path(),
                    results: Vec::new(),
                    failures: Vec::new(),
                    cursor,
                    next_index: 0,
                    elapsed_before: 0.0,
                    started: Instant::now(),
                    session_done: 0,
                    last_error: None,
                },
            )
        }
        Some(ck) => {
            if ck.spec_digest != prep.spec_digest {
                return Err(EngineError::DigestMismatch {
                    expected: ck.spec_digest,
                    found: prep.spec_digest.clone(),
                }
                .into());
            }
            let stream = PlanStream::resume(plan, &ck.cursor)?;
            (
                stream,
                Progress {
                    prep,
                    checkpoint_path: prep.spec.checkpoint_path(),
                    last_error: ck.failures.last().map(|f| f.error.clone()),
                    results: ck.results,
                    failures: ck.failures,
                    cursor: ck.cursor,
                    next_index: ck.next_index,
                    elapsed_before: ck.elapsed_s,
                    started: Instant::now(),
                    session_done: 0,
                },
            )
        }
    };

    let spec = &prep.spec;
    let workers = spec.worker_count();
    let ds: &Dataset = &prep.dataset;
    let cfg = &spec.config;
    let record_timing = spec.record_timing;
    let interval = spec.checkpoint_interval;
    log::info!(
        "running {} tasks ({} done) over {} rows x {} attributes, k = {}, {} workers",
        progress.total(),
        progress.next_index,
        ds.m(),
        ds.n(),
        prep.plan.k,
        workers
    );
    observer.started(&progress.status(RunState::Running), progress.cursor.report());
    progress.save(RunState::Running, observer)?;

    let dispatched = AtomicU64::new(0);
    let (job_tx, job_rx) = bounded::<Job>(workers * 2);
    let (done_tx, done_rx) = unbounded::<Done>();
    let start_index = progress.next_index;

    let (final_report, exhausted, saved_error) = std::thread::scope(|s| {
        let dispatched = &dispatched;
        let generator = s.spawn(move || {
            let mut stream = stream;
            let mut index = start_index;
            let mut exhausted = false;
            loop {
                if control.wait_while_paused() == ControlSignal::Cancel {
                    break;
                }
                let Some(set) = stream.next() else {
                    exhausted = true;
                    break;
                };
                let job = Job {
                    index,
                    set,
                    cursor: stream.cursor(),
                };
                dispatched.fetch_add(1, Ordering::SeqCst);
                if job_tx.send(job).is_err() {
                    break;
                }
                index += 1;
            }
            (stream.report(), exhausted)
        });
        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let done_tx = done_tx.clone();
            s.spawn(move || {
                while let Ok(job) = job_rx.recv() {
                    if control.is_cancelled() {
                        continue;
                    }
                    let outcome = guarded(evaluator, ds, cfg, &job.set, job.index, record_timing);
                    if done_tx.send(Done { job, outcome }).is_err() {
                        break;
                    }
                }
            });
        }
        drop(job_rx);
        drop(done_tx);

        let mut pending: BTreeMap<u64, Done> = BTreeMap::new();
        let mut since_save = 0u64;
        let mut paused_saved = false;
        let mut save_error: Option<Error> = None;
        let note = |r: Result<()>, slot: &mut Option<Error>| {
            if let Err(e) = r {
                log::error!("checkpoint write failed: {e}");
                slot.get_or_insert(e);
            }
        };
        loop {
            match done_rx.recv_timeout(Duration::from_millis(20)) {
                Ok(d) => {
                    pending.insert(d.job.index, d);
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
            while let Some(d) = pending.remove(&progress.next_index) {
                progress.next_index += 1;
                progress.session_done += 1;
                progress.cursor = d.job.cursor;
                match d.outcome {
                    Ok(result) => {
                        let record = TaskRecord {
                            index: d.job.index,
                            result,
                        };
                        let status = progress.status(RunState::Running);
                        observer.committed(&record, &status);
                        progress.results.push(record);
                    }
                    Err(error) => {
                        log::warn!("task {} {} failed: {error}", d.job.index, d.job.set);
                        progress.last_error = Some(error.clone());
                        let failure = TaskFailure {
                            index: d.job.index,
                            attribute_set: d.job.set,
                            error,
                        };
                        progress.failures.push(failure.clone());
                        observer.failed(&failure, &progress.status(RunState::Running));
                    }
                }
                since_save += 1;
                if interval > 0 && since_save >= interval {
                    since_save = 0;
                    note(progress.save(RunState::Running, observer), &mut save_error);
                    log::info!("{} of {} tasks done", progress.next_index, progress.total());
                }
            }
            let parked = control.is_parked();
            if parked && !paused_saved && progress.session_done == dispatched.load(Ordering::SeqCst) {
                paused_saved = true;
                note(progress.save(RunState::Paused, observer), &mut save_error);
                observer.state_changed(&progress.status(RunState::Paused));
            } else if paused_saved && control.signal() == ControlSignal::Run {
                paused_saved = false;
                observer.state_changed(&progress.status(RunState::Running));
            }
        }
        let (report, exhausted) = generator.join().expect("generator thread panicked");
        (report, exhausted, save_error)
    });

    let all_committed = progress.session_done == dispatched.load(Ordering::SeqCst);
    let state = if exhausted && all_committed {
        RunState::Completed
    } else {
        RunState::Cancelled
    };
    if state == RunState::Completed && progress.next_index == 0 {
        return Err(GensetError::NoViablePartitions.into());
    }
    progress.save(state, observer)?;
    if let Some(e) = saved_error {
        return Err(e);
    }
    let output = spec.output.clone();
    if state == RunState::Completed {
        if let Some(out) = &output {
            let results: Vec<TaskResult> = progress.results.iter().map(|r| r.result.clone()).collect();
            write_results_csv(out, &results, ds.class_count())?;
        }
    }
    let status = progress.status(state);
    observer.state_changed(&status);
    log::info!(
        "{:?}: {} tasks, {} failed, {:.1}s",
        state,
        status.done,
        status.failed,
        status.elapsed_s
    );
    Ok(RunOutcome {
        status,
        class_count: ds.class_count(),
        results: progress.results,
        failures: progress.failures,
        report: if state == RunState::Completed {
            final_report
        } else {
            progress.cursor.report().clone()
        },
        output: if state == RunState::Completed { output } else { None },
        checkpoint: progress.checkpoint_path,
    })
}
