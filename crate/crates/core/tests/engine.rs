mod common;

use std::path::{Path, PathBuf};

use putwb_core::engine::{
    evaluate_set, evaluate_sets, resume_experiment, resume_with, run_experiment, run_with, Checkpoint, Control,
    EngineError, ExperimentSpec, NoObserver, PreparedExperiment, RunObserver, RunState, TaskEvaluator, TaskRecord,
};
use putwb_core::genset::GensetError;
use putwb_core::learners::LearnerKind;
use putwb_core::metrics::TaskResult;
use putwb_core::{AttributeSet, Dataset, Error, PutConfig, SizeSpec};

fn spec(data: &Path, out: &Path, workers: usize) -> ExperimentSpec {
    let mut cfg = PutConfig::new(SizeSpec::PartitionSize(3), LearnerKind::NaiveBayes);
    cfg.seed = 7;
    let mut s = ExperimentSpec::new(data, cfg);
    s.output = Some(out.to_path_buf());
    s.workers = Some(workers);
    s.checkpoint_interval = 5;
    s.record_timing = false;
    s
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Cancels the run after `after` commits.
struct CancelAfter {
    control: Control,
    after: u64,
    seen: u64,
}

impl RunObserver for CancelAfter {
    fn committed(&mut self, _r: &TaskRecord, _s: &putwb_core::engine::ExperimentStatus) {
        self.seen += 1;
        if self.seen == self.after {
            self.control.cancel();
        }
    }
}

fn baseline(dir: &Path, data: &Path) -> String {
    let out = dir.join("baseline.csv");
    let prep = PreparedExperiment::load(spec(data, &out, 1)).unwrap();
    let o = run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
    assert_eq!(o.results.len(), 56);
    read(&out)
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 240, 1);
    let base = baseline(dir.path(), &data);
    assert_eq!(base.lines().count(), 57);
    let out = dir.path().join("w4.csv");
    let prep = PreparedExperiment::load(spec(&data, &out, 4)).unwrap();
    run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(read(&out), base);
}

#[test]
fn repeated_cancel_and_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 240, 2);
    let base = baseline(dir.path(), &data);
    let out = dir.path().join("cut.csv");
    let s = spec(&data, &out, 3);
    let ckpt = s.checkpoint_path().unwrap();
    let prep = PreparedExperiment::load(s).unwrap();
    let control = Control::new();
    let mut obs = CancelAfter {
        control: control.clone(),
        after: 4,
        seen: 0,
    };
    let first = run_with(&prep, &control, &Slow, &mut obs, None).unwrap();
    assert_eq!(first.status.state, RunState::Cancelled);
    assert!(!out.exists());
    let mut rounds = 0;
    loop {
        rounds += 1;
        let control = Control::new();
        let mut obs = CancelAfter {
            control: control.clone(),
            after: 7,
            seen: 0,
        };
        let o = resume_with(&ckpt, None, &control, &Slow, &mut obs).unwrap();
        if o.status.state == RunState::Completed {
            break;
        }
        assert!(rounds < 20);
    }
    assert!(rounds > 3);
    assert_eq!(read(&out), base);
}

/// Slow enough that a cancel lands while tasks are still queued.
struct Slow;

impl TaskEvaluator for Slow {
    fn evaluate(
        &self,
        ds: &Dataset,
        cfg: &PutConfig,
        set: &AttributeSet,
        index: u64,
        timing: bool,
    ) -> putwb_core::Result<TaskResult> {
        std::thread::sleep(std::time::Duration::from_millis(3));
        evaluate_set(ds, cfg, set, index, timing)
    }
}

/// Keeps every checkpoint written, as a crash could leave any of them.
#[derive(Default)]
struct Snapshots(Vec<Checkpoint>);

impl RunObserver for Snapshots {
    fn checkpointed(&mut self, _p: &Path, c: &Checkpoint) {
        self.0.push(c.clone());
    }
}

#[test]
fn resume_from_any_checkpoint_matches() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 200, 3);
    let base = baseline(dir.path(), &data);
    let out = dir.path().join("snap.csv");
    let s = spec(&data, &out, 2);
    let prep = PreparedExperiment::load(s.clone()).unwrap();
    let mut snaps = Snapshots::default();
    run_experiment(&prep, &Control::new(), &mut snaps).unwrap();
    assert!(snaps.0.len() >= 10);
    for (i, c) in snaps.0.iter().enumerate().step_by(3) {
        let path = dir.path().join(format!("old{i}.ckpt"));
        c.save(&path).unwrap();
        std::fs::remove_file(&out).ok();
        let o = resume_experiment(&path, None, &Control::new(), &mut NoObserver).unwrap();
        assert_eq!(o.status.state, RunState::Completed);
        assert_eq!(read(&out), base, "resumed from snapshot {i}");
    }
}

#[test]
fn resuming_a_completed_run_rewrites_the_same_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 200, 4);
    let out = dir.path().join("r.csv");
    let s = spec(&data, &out, 2);
    let ckpt = s.checkpoint_path().unwrap();
    run_experiment(&PreparedExperiment::load(s).unwrap(), &Control::new(), &mut NoObserver).unwrap();
    let before = read(&out);
    std::fs::remove_file(&out).unwrap();
    let o = resume_experiment(&ckpt, None, &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
    assert_eq!(read(&out), before);
}

struct Poisoned(AttributeSet);

impl TaskEvaluator for Poisoned {
    fn evaluate(
        &self,
        ds: &Dataset,
        cfg: &PutConfig,
        set: &AttributeSet,
        index: u64,
        timing: bool,
    ) -> putwb_core::Result<TaskResult> {
        if *set == self.0 {
            panic!("poisoned partition");
        }
        evaluate_set(ds, cfg, set, index, timing)
    }
}

#[test]
fn a_failing_task_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 200, 5);
    let out = dir.path().join("p.csv");
    let prep = PreparedExperiment::load(spec(&data, &out, 3)).unwrap();
    let bad: AttributeSet = "{1, 2, 3}".parse().unwrap();
    let o = run_with(&prep, &Control::new(), &Poisoned(bad.clone()), &mut NoObserver, None).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
    assert_eq!(o.results.len(), 55);
    assert_eq!(o.failures.len(), 1);
    assert_eq!(o.failures[0].attribute_set, bad);
    assert!(o.failures[0].error.contains("poisoned"));
    assert_eq!(read(&out).lines().count(), 56);
}

/// Pauses after a few commits and resumes once the pause is recorded.
struct PauseOnce {
    control: Control,
    paused_checkpoints: usize,
    states: Vec<RunState>,
    seen: u64,
}

impl RunObserver for PauseOnce {
    fn committed(&mut self, _r: &TaskRecord, _s: &putwb_core::engine::ExperimentStatus) {
        self.seen += 1;
        if self.seen == 3 {
            self.control.pause();
        }
    }
    fn state_changed(&mut self, s: &putwb_core::engine::ExperimentStatus) {
        self.states.push(s.state);
        if s.state == RunState::Paused {
            self.control.resume();
        }
    }
    fn checkpointed(&mut self, _p: &Path, c: &Checkpoint) {
        if c.state == RunState::Paused {
            self.paused_checkpoints += 1;
        }
    }
}

#[test]
fn pause_writes_checkpoint_and_resume_continues() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 200, 6);
    let base = baseline(dir.path(), &data);
    let out = dir.path().join("pause.csv");
    let prep = PreparedExperiment::load(spec(&data, &out, 2)).unwrap();
    let control = Control::new();
    let mut obs = PauseOnce {
        control: control.clone(),
        paused_checkpoints: 0,
        states: Vec::new(),
        seen: 0,
    };
    let o = run_experiment(&prep, &control, &mut obs).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
    assert_eq!(obs.paused_checkpoints, 1);
    assert_eq!(obs.states, [RunState::Paused, RunState::Running, RunState::Completed]);
    assert_eq!(read(&out), base);
}

fn saved_checkpoint(dir: &Path) -> (PathBuf, PathBuf) {
    let data = common::write_toy(dir, 8, 150, 8);
    let out = dir.join("c.csv");
    let s = spec(&data, &out, 1);
    let ckpt = s.checkpoint_path().unwrap();
    let control = Control::new();
    let mut obs = CancelAfter {
        control: control.clone(),
        after: 10,
        seen: 0,
    };
    run_experiment(&PreparedExperiment::load(s).unwrap(), &control, &mut obs).unwrap();
    (data, ckpt)
}

fn engine_err(e: Error) -> EngineError {
    match e {
        Error::Engine(e) => e,
        other => panic!("expected engine error, got {other}"),
    }
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ckpt) = saved_checkpoint(dir.path());
    let bytes = std::fs::read(&ckpt).unwrap();
    assert!(Checkpoint::from_bytes(&bytes).is_ok());

    for cut in [4, 15, bytes.len() / 2, bytes.len() - 1] {
        let e = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(e, EngineError::TornCheckpoint(_)), "cut {cut}: {e}");
    }
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x20;
    assert!(matches!(
        Checkpoint::from_bytes(&flipped),
        Err(EngineError::TornCheckpoint(_))
    ));

    let mut version = bytes.clone();
    version[8] = 9;
    assert!(matches!(
        Checkpoint::from_bytes(&version),
        Err(EngineError::VersionMismatch { found: 9, .. })
    ));
    assert!(matches!(
        Checkpoint::from_bytes(b"hello world, not ours"),
        Err(EngineError::NotACheckpoint)
    ));
}

#[test]
fn edited_dataset_is_detected_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = saved_checkpoint(dir.path());
    let mut text = read(&data);
    text.push_str("x,1.0,y,2.0,z,3.0,x,4.0,yes\n");
    std::fs::write(&data, text).unwrap();
    let e = resume_experiment(&ckpt, None, &Control::new(), &mut NoObserver).unwrap_err();
    assert!(matches!(engine_err(e), EngineError::DigestMismatch { .. }));
}

#[test]
fn changed_spec_is_detected_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = saved_checkpoint(dir.path());
    let mut other = spec(&data, &dir.path().join("c.csv"), 4);
    other.config.seed = 99;
    let e = resume_experiment(&ckpt, Some(&other), &Control::new(), &mut NoObserver).unwrap_err();
    assert!(matches!(engine_err(e), EngineError::DigestMismatch { .. }));
    // Worker count alone is not part of the digest.
    let same = spec(&data, &dir.path().join("c.csv"), 4);
    let o = resume_experiment(&ckpt, Some(&same), &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
}

#[test]
fn every_set_excluded_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 4, 60, 9);
    let mut s = spec(&data, &dir.path().join("x.csv"), 1);
    s.config.privacy_exceptions = vec!["{1}".parse().unwrap(), "{2}".parse().unwrap()];
    let prep = PreparedExperiment::load(s).unwrap();
    let e = run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap_err();
    assert!(matches!(e, Error::Genset(GensetError::NoViablePartitions)));
}

#[test]
fn invalid_dataset_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.arff");
    std::fs::write(
        &p,
        "@relation r\n@attribute a numeric\n@attribute c {p,q}\n@data\n1,p\n2,p\n",
    )
    .unwrap();
    let cfg = PutConfig::new(SizeSpec::PartitionSize(1), LearnerKind::NaiveBayes);
    let e = PreparedExperiment::load(ExperimentSpec::new(&p, cfg)).unwrap_err();
    match engine_err(e) {
        EngineError::InvalidDataset(v) => assert_eq!(v.len(), 1),
        other => panic!("{other}"),
    }
}

#[test]
fn list_evaluation_matches_full_sample_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 6, 180, 10);
    let mut s = spec(&data, &dir.path().join("v.csv"), 2);
    s.config.size = SizeSpec::PartitionSize(2);
    s.config.learner = LearnerKind::tree();
    let prep = PreparedExperiment::load(s.clone()).unwrap();
    let run = run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap();
    let mut sets: Vec<AttributeSet> = run.results.iter().map(|r| r.result.attribute_set.clone()).collect();
    sets.reverse();
    let listed = evaluate_sets(&prep.dataset, &s.config, &sets, 3, false, &Control::new());
    for (set, r) in sets.iter().zip(listed) {
        let r = r.unwrap().unwrap();
        let from_run = run.results.iter().find(|x| &x.result.attribute_set == set).unwrap();
        assert_eq!(r, from_run.result);
    }
}
