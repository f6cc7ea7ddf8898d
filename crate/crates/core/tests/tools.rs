mod common;

use putwb_core::engine::{
    run_experiment, Checkpoint, Control, ExperimentSpec, ExperimentStatus, NoObserver, PreparedExperiment, RunObserver,
    RunState, TaskRecord,
};
use putwb_core::learners::LearnerKind;
use putwb_core::metrics::SortCriteria;
use putwb_core::tools::{
    autopilot, recover, render_report_csv, select_top, verify, verify_results, AutopilotOptions, RecoverMode,
    ToolsError,
};
use putwb_core::{AttributeSet, Error, GenerationMethod, PutConfig, SizeSpec};

fn cfg(k: usize) -> PutConfig {
    let mut c = PutConfig::new(SizeSpec::PartitionSize(k), LearnerKind::NaiveBayes);
    c.seed = 3;
    c
}

fn strip_time(mut r: putwb_core::metrics::TaskResult) -> putwb_core::metrics::TaskResult {
    r.time_taken_s = 0.0;
    r
}

#[test]
fn verify_matches_full_sample_engine_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 4, 150, 11);
    let mut spec = ExperimentSpec::new(&data, cfg(2));
    spec.record_timing = false;
    let prep = PreparedExperiment::load(spec).unwrap();
    let run = run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(run.results.len(), 6);
    let sets: Vec<AttributeSet> = putwb_core::genset::dictionary_stream(4, 2).collect();
    let report = verify(&prep.dataset, &cfg(2), &sets, 2).unwrap();
    assert_eq!(report.rows.len(), 6);
    for row in &report.rows {
        let from_run = run
            .results
            .iter()
            .find(|r| r.result.attribute_set == row.full.attribute_set)
            .unwrap();
        assert_eq!(strip_time(row.full.clone()), from_run.result);
    }
}

#[test]
fn verify_is_independent_of_set_order() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 5, 120, 12);
    let prep = PreparedExperiment::load(ExperimentSpec::new(&data, cfg(2))).unwrap();
    let mut sets: Vec<AttributeSet> = putwb_core::genset::dictionary_stream(5, 2).collect();
    let a = verify(&prep.dataset, &cfg(2), &sets, 1).unwrap();
    sets.reverse();
    let b = verify(&prep.dataset, &cfg(2), &sets, 3).unwrap();
    let strip = |r: &putwb_core::tools::VerificationReport| -> Vec<_> {
        r.rows.iter().map(|x| strip_time(x.full.clone())).collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn verify_rejects_bad_input() {
    let ds = common::shaped(50, 30);
    let e = verify(&ds, &cfg(1), &["{99}".parse().unwrap()], 1).unwrap_err();
    assert!(matches!(e, Error::Tools(ToolsError::UnknownAttribute { n: 30, .. })));
    let e = verify(&ds, &cfg(1), &[], 1).unwrap_err();
    assert!(matches!(e, Error::Tools(ToolsError::EmptySetList)));
}

#[test]
fn report_pairs_experiment_and_full_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 6, 400, 13);
    let mut c = cfg(3);
    c.horizontal_expense = 0.3;
    let prep = PreparedExperiment::load(ExperimentSpec::new(&data, c.clone())).unwrap();
    let run = run_experiment(&prep, &Control::new(), &mut NoObserver).unwrap();
    let top = select_top(&run.task_results(), &SortCriteria::default(), 5);
    assert_eq!(top.len(), 5);
    let report = verify_results(&prep.dataset, &c, &top, 2).unwrap();
    assert_eq!(report.rows.len(), 5);
    let csv = render_report_csv(&report);
    let mut lines = csv.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("attribute_set,time_taken_exp,time_taken_full,time_taken_delta,accuracy_exp,accuracy_full,accuracy_delta,tp_0_exp"));
    assert_eq!(head.split(',').count(), 1 + 3 * (2 + 14));
    for (row, line) in report.rows.iter().zip(lines) {
        let exp = row.experiment.as_ref().unwrap();
        assert_eq!(exp.attribute_set, row.full.attribute_set);
        let fields: Vec<&str> = line.split("\",").nth(1).unwrap().split(',').collect();
        let delta: f64 = fields[5].parse().unwrap();
        assert!((delta - (row.full.accuracy_pct - exp.accuracy_pct)).abs() < 1e-4);
    }
}

struct CancelAt(Control, u64);

impl RunObserver for CancelAt {
    fn committed(&mut self, r: &TaskRecord, _s: &ExperimentStatus) {
        if r.index + 1 == self.1 {
            self.0.cancel();
        }
    }
}

#[test]
fn recover_dumps_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_toy(dir.path(), 8, 150, 14);
    let mut spec = ExperimentSpec::new(&data, cfg(3));
    spec.output = Some(dir.path().join("r.csv"));
    spec.workers = Some(1);
    let ckpt = spec.checkpoint_path().unwrap();
    let control = Control::new();
    run_experiment(
        &PreparedExperiment::load(spec).unwrap(),
        &control,
        &mut CancelAt(control.clone(), 10),
    )
    .unwrap();
    let saved = Checkpoint::load(&ckpt).unwrap();
    assert!(saved.results.len() >= 10);
    // Trim to exactly ten tasks; a dump must reproduce them.
    let mut ten = saved.clone();
    ten.results.truncate(10);
    let ten_path = dir.path().join("ten.ckpt");
    ten.save(&ten_path).unwrap();
    let dumped = dir.path().join("dump.csv");
    let o = recover(
        &ten_path,
        &RecoverMode::Dump { output: dumped.clone() },
        &Control::new(),
        &mut NoObserver,
    )
    .unwrap();
    assert_eq!(o.status.state, RunState::Recovered);
    assert_eq!(std::fs::read_to_string(&dumped).unwrap().lines().count(), 11);

    let o = recover(&ckpt, &RecoverMode::Resume, &Control::new(), &mut NoObserver).unwrap();
    assert_eq!(o.status.state, RunState::Completed);
    assert_eq!(o.results.len(), 56);

    let e = recover(
        &dir.path().join("missing.ckpt"),
        &RecoverMode::Resume,
        &Control::new(),
        &mut NoObserver,
    )
    .unwrap_err();
    assert!(matches!(e, Error::Tools(ToolsError::FileNotFound(_))));
}

fn quiet() -> AutopilotOptions {
    AutopilotOptions {
        probe: false,
        workers: Some(2),
        ..Default::default()
    }
}

#[test]
fn autopilot_examples() {
    let adultlike = autopilot(
        &common::shaped(45_175, 14),
        SizeSpec::PartitionSize(7),
        &LearnerKind::tree(),
        &quiet(),
    )
    .unwrap();
    assert_eq!(adultlike.horizontal_expense, 1.0);
    assert_eq!(adultlike.vertical_expense, 1.0);
    assert_eq!(adultlike.estimated_tasks, 3432);
    assert_eq!(adultlike.generation, GenerationMethod::Dictionary);

    let cards = autopilot(
        &common::shaped(284_807, 30),
        SizeSpec::PartitionSize(15),
        &LearnerKind::tree(),
        &quiet(),
    )
    .unwrap();
    assert_eq!(cards.horizontal_expense, 0.1);
    assert_eq!(cards.generation, GenerationMethod::Random);
    assert_eq!(cards.estimated_tasks, 10_000);
    assert!(cards.vertical_expense < 1e-4);

    let tiny = autopilot(
        &common::shaped(100, 4),
        SizeSpec::PartitionSize(2),
        &LearnerKind::NaiveBayes,
        &quiet(),
    )
    .unwrap();
    assert_eq!((tiny.horizontal_expense, tiny.vertical_expense), (1.0, 1.0));
    assert_eq!(tiny.generation, GenerationMethod::Dictionary);
    assert!(!tiny.notes.is_empty());
}

#[test]
fn autopilot_is_deterministic_and_capped() {
    let ds = common::shaped(3000, 20);
    let opts = AutopilotOptions {
        probe: true,
        workers: Some(1),
        ..Default::default()
    };
    for k in [1, 5, 10, 15, 20] {
        let a = autopilot(&ds, SizeSpec::PartitionSize(k), &LearnerKind::NaiveBayes, &opts).unwrap();
        let b = autopilot(&ds, SizeSpec::PartitionSize(k), &LearnerKind::NaiveBayes, &opts).unwrap();
        assert_eq!(
            (
                a.vertical_expense,
                a.horizontal_expense,
                a.generation,
                a.estimated_tasks
            ),
            (
                b.vertical_expense,
                b.horizontal_expense,
                b.generation,
                b.estimated_tasks
            )
        );
        assert!(a.estimated_tasks <= opts.task_cap);
        assert!(a.estimated_seconds.is_some() && a.runtime_class.is_some());
    }
}
