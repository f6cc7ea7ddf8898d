mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use clap::CommandFactory;
use serde_json::Value;

use common::{code, putwb, run, s, stderr, write_toy};
use putwb_cli::Cli;
use putwb_core::engine::{read_results_csv, ExperimentSpec};
use putwb_core::learners::LearnerKind;
use putwb_core::{AttributeSet, PutConfig, SizeSpec};

fn long_flags(cmd: &clap::Command) -> Vec<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "help" && l != "version")
        .collect()
}

#[test]
fn help_lists_every_flag() {
    let mut root = Cli::command();
    root.build();
    for sub in root.get_subcommands().filter(|c| c.get_name() != "help") {
        let out = run(&[sub.get_name(), "--help"]);
        assert_eq!(code(&out), 0);
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in long_flags(sub) {
            assert!(
                help.contains(&format!("--{flag}")),
                "`{}` help lacks --{flag}",
                sub.get_name()
            );
        }
    }
}

fn json_keys(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match child {
                Value::Object(_) if k != "learner" => json_keys(child, &key, out),
                _ => {
                    out.insert(key);
                }
            }
        }
    }
}

#[test]
fn every_spec_field_has_a_flag() {
    let mut cfg = PutConfig::new(SizeSpec::PartitionSize(2), LearnerKind::tree());
    cfg.privacy_exceptions = vec![AttributeSet::new([1, 2]).unwrap()];
    cfg.utility_exceptions = vec![AttributeSet::new([3]).unwrap()];
    let mut spec = ExperimentSpec::new("d.arff", cfg);
    spec.dataset.format = Some(putwb_core::engine::DataFormat::Arff);
    spec.dataset.class_attribute = Some("c".into());
    spec.dataset.digest = Some("00".into());
    spec.output = Some("r.csv".into());
    spec.checkpoint = Some("r.ckpt".into());
    spec.workers = Some(2);
    spec.autopilot = true;
    let mut keys = BTreeSet::new();
    json_keys(&serde_json::from_str(&spec.to_json()).unwrap(), "", &mut keys);
    keys.insert("config.put_number".into());

    let table = [
        ("dataset.path", "dataset"),
        ("dataset.format", "format"),
        ("dataset.class_attribute", "class"),
        ("config.partition_size", "partition-size"),
        ("config.put_number", "put-number"),
        ("config.learner", "learner"),
        ("config.privacy_exceptions", "privacy"),
        ("config.utility_exceptions", "utility"),
        ("config.vertical_expense", "vertical-expense"),
        ("config.horizontal_expense", "horizontal-expense"),
        ("config.generation", "generation"),
        ("config.seed", "seed"),
        ("config.folds", "folds"),
        ("clean.missing", "missing"),
        ("clean.dedupe", "dedupe"),
        ("output", "out"),
        ("checkpoint", "checkpoint"),
        ("checkpoint_interval", "checkpoint-interval"),
        ("workers", "workers"),
        ("budget_cap", "budget-cap"),
        ("record_timing", "no-timing"),
        ("autopilot", "autopilot"),
    ];
    let mut root = Cli::command();
    root.build();
    let run_cmd = root.find_subcommand("run").unwrap();
    let flags = long_flags(run_cmd);
    for key in &keys {
        if key == "dataset.digest" {
            continue;
        }
        let (_, flag) = table
            .iter()
            .find(|(k, _)| k == key)
            .unwrap_or_else(|| panic!("spec field `{key}` has no flag"));
        assert!(flags.iter().any(|f| f == flag), "--{flag} missing");
    }
}

#[test]
fn flags_override_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 60);
    let spec_path = dir.path().join("spec.json");
    let mut cfg = PutConfig::new(SizeSpec::PutNumber(0.0), LearnerKind::NaiveBayes);
    cfg.seed = 5;
    cfg.folds = 3;
    let mut spec = ExperimentSpec::new(&ds, cfg);
    spec.workers = Some(2);
    spec.checkpoint_interval = 7;
    std::fs::write(&spec_path, spec.to_json()).unwrap();

    let resolved = |extra: &[&str], env: Option<&str>| -> ExperimentSpec {
        let mut c = putwb();
        c.args(["run", "--spec", s(&spec_path), "--print-spec"]).args(extra);
        if let Some(w) = env {
            c.env("PUTWB_WORKERS", w);
        }
        let out = c.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        ExperimentSpec::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap()
    };

    let same = resolved(&[], None);
    assert_eq!(same.config, spec.config);
    assert_eq!(same.checkpoint_interval, 7);

    let r = resolved(
        &[
            "--seed",
            "9",
            "--partition-size",
            "2",
            "--learner",
            "tree",
            "--privacy",
            "1,3;2,4",
            "--no-timing",
        ],
        Some("7"),
    );
    assert_eq!(r.config.seed, 9);
    assert_eq!(r.config.folds, 3);
    assert_eq!(r.config.size, SizeSpec::PartitionSize(2));
    assert_eq!(r.config.learner, LearnerKind::tree());
    assert_eq!(r.config.privacy_exceptions.len(), 2);
    assert!(!r.record_timing);
    assert_eq!(r.workers, Some(2), "the file beats the environment");

    assert_eq!(resolved(&["--workers", "3"], Some("7")).workers, Some(3));
    spec.workers = None;
    std::fs::write(&spec_path, spec.to_json()).unwrap();
    assert_eq!(resolved(&[], Some("7")).workers, Some(7));
    assert_eq!(resolved(&[], None).workers, None);
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 6, 120);
    let out = dir.path().join("r.csv");
    let o = run(&[
        "run",
        "--dataset",
        s(&ds),
        "--learner",
        "tree",
        "--put-number",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty(), "machine output went to the file");
    let rows = read_results_csv(&out).unwrap();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.attribute_set.len() == 3));
}

#[test]
fn run_without_out_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 80);
    let o = run(&["run", "--dataset", s(&ds), "-k", "1", "--learner", "nb", "-q"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = putwb_core::engine::parse_results_csv(&o.stdout).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 60);
    let d = s(&ds);
    let cases: &[(&[&str], i32)] = &[
        (
            &["run", "--dataset", d, "--partition-size", "3", "--put-number", "0"],
            1,
        ),
        (&["run", "--dataset", d], 1),
        (&["run", "--dataset", d, "--put-number", "2"], 1),
        (&["run", "--dataset", d, "-k", "2", "--vertical-expense", "0"], 1),
        (&["run", "--dataset", d, "-k", "2", "--bogus"], 1),
        (&["run", "--dataset", d, "-k", "2", "--privacy", "1,x"], 1),
        (&["nonsense"], 1),
        (&["run", "--dataset", "/nonexistent/d.arff", "-k", "2"], 2),
        (&["run", "--dataset", d, "-k", "9"], 2),
        (&["run", "--dataset", d, "-k", "1", "--privacy", "1;2;3;4"], 2),
        (&["sweep", "--dataset", d, "--sizes", "3..1", "--out", "x.csv"], 1),
        (
            &["sweep", "--dataset", d, "--put-numbers", "1:-1:0.5", "--out", "x.csv"],
            1,
        ),
        (&["recover", "/nonexistent.ckpt", "--resume"], 2),
        (&["recover", d, "--resume"], 2),
        (&["serve", "--bind", "0.0.0.0:0"], 1),
        (&["--help"], 0),
        (&["--version"], 0),
    ];
    for (args, expected) in cases {
        let o = run(args);
        assert_eq!(code(&o), *expected, "{args:?}: {}", stderr(&o));
    }
    let bad = dir.path().join("bad.arff");
    std::fs::write(
        &bad,
        "@relation r\n@attribute a numeric\n@attribute c numeric\n@data\n1,2\n",
    )
    .unwrap();
    let o = run(&["run", "--dataset", s(&bad), "-k", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn interrupt_then_resume_matches_control() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 12, 3000);
    let control = dir.path().join("control.csv");
    let out = dir.path().join("r.csv");
    let common = [
        "--dataset",
        s(&ds),
        "-k",
        "6",
        "--learner",
        "tree",
        "--no-timing",
        "--checkpoint-interval",
        "10",
    ];

    let mut child = putwb()
        .arg("run")
        .args(common)
        .args(["--out", s(&out)])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let ckpt = dir.path().join("r.csv.ckpt");
    let start = Instant::now();
    while !ckpt.exists() {
        assert!(start.elapsed() < Duration::from_secs(60), "no checkpoint appeared");
        std::thread::sleep(Duration::from_millis(20));
    }
    std::thread::sleep(Duration::from_millis(400));
    let killed = std::process::Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(130), "run finished before the interrupt");
    assert!(ckpt.exists());
    assert!(!out.exists());

    let o = run(&["inspect", s(&ckpt)]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["kind"], "checkpoint");
    assert_eq!(doc["state"], "cancelled");
    let partial = doc["committed"].as_u64().unwrap();
    assert!(partial > 0 && partial < 924, "{partial}");

    let o = run(&["recover", s(&ckpt), "--resume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[&["run"][..], &common[..], &["--out", s(&control)]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&control).unwrap());
}

#[test]
fn recover_dump_writes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 5, 80);
    let out = dir.path().join("r.csv");
    let o = run(&[
        "run",
        "--dataset",
        s(&ds),
        "-k",
        "2",
        "--learner",
        "nb",
        "--out",
        s(&out),
        "--no-timing",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dumped = dir.path().join("dump.csv");
    let o = run(&["recover", &format!("{}.ckpt", s(&out)), "--dump", s(&dumped)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&dumped).unwrap(), std::fs::read(&out).unwrap());
    assert_eq!(
        code(&run(&["recover", &format!("{}.ckpt", s(&out))])),
        1,
        "a mode is required"
    );
}

fn csv_rows(path: &std::path::Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn sweep_sizes_writes_each_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 150);
    let out = dir.path().join("s.csv");
    let o = run(&[
        "sweep",
        "--dataset",
        s(&ds),
        "--sizes",
        "1..4",
        "--learner",
        "tree",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = csv_rows(&dir.path().join("s_summary.csv"));
    assert_eq!(summary.len(), 5);
    assert_eq!(summary[0][..5], ["value", "partition_size", "tasks", "failed", "error"]);
    let acc_col = summary[0].iter().position(|h| h == "accuracy").unwrap();
    for (k, line) in summary.iter().enumerate().skip(1) {
        let rows = read_results_csv(&dir.path().join(format!("s_{k}.csv"))).unwrap();
        let best = rows.iter().map(|r| r.accuracy_pct).fold(f64::MIN, f64::max);
        assert_eq!(line[0], k.to_string());
        assert_eq!(line[1], k.to_string());
        assert_eq!(line[2], rows.len().to_string());
        assert_eq!(line[acc_col], format!("{best:.5}"));
    }
}

#[test]
fn sweep_put_numbers_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 100);
    let out = dir.path().join("p.csv");
    let o = run(&[
        "sweep",
        "--dataset",
        s(&ds),
        "--put-numbers",
        "-1:1:0.5",
        "--learner",
        "nb",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for v in ["-1", "-0.5", "0", "0.5", "1"] {
        assert!(dir.path().join(format!("p_{v}.csv")).exists(), "{v}");
    }
    assert_eq!(csv_rows(&dir.path().join("p_summary.csv")).len(), 6);

    let o = run(&[
        "sweep",
        "--dataset",
        s(&ds),
        "--sizes",
        "1,2",
        "--learner",
        "nb",
        "--privacy",
        "1;2;3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 3, "one value fails");
    let summary = csv_rows(&dir.path().join("p_summary.csv"));
    assert_eq!(summary.len(), 3);
    assert_eq!(summary[1][2], "1");
    assert!(!summary[2][4].is_empty(), "size 2 has no viable set");
    assert_eq!(summary[2][2], "0");
}

#[test]
fn verify_from_literal_file_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 5, 150);
    let out = dir.path().join("r.csv");
    let o = run(&[
        "run",
        "--dataset",
        s(&ds),
        "-k",
        "2",
        "--learner",
        "nb",
        "--horizontal-expense",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let report = dir.path().join("v.csv");
    let o = run(&[
        "verify",
        "--dataset",
        s(&ds),
        "--learner",
        "nb",
        "--results",
        s(&out),
        "--top",
        "3",
        "--sort",
        "accuracy:desc",
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&report);
    assert_eq!(rows.len(), 4);
    assert!(rows[0].contains(&"accuracy_exp".to_string()));
    assert!(rows[1].iter().all(|c| !c.is_empty()));

    let list = dir.path().join("sets.txt");
    std::fs::write(&list, "# exported\n{1, 2}\n\n3,4\n").unwrap();
    let from_file = dir.path().join("f.csv");
    let o = run(&[
        "verify",
        "--dataset",
        s(&ds),
        "--learner",
        "nb",
        "--sets-file",
        s(&list),
        "--out",
        s(&from_file),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let inline = dir.path().join("i.csv");
    let o = run(&[
        "verify",
        "--dataset",
        s(&ds),
        "--learner",
        "nb",
        "--sets",
        "3,4;1,2",
        "--out",
        s(&inline),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let strip_time = |p: &std::path::Path| -> Vec<Vec<String>> {
        let rows = csv_rows(p);
        let t = rows[0].iter().position(|h| h == "time_taken_full").unwrap();
        rows.into_iter()
            .map(|mut r| {
                r.remove(t);
                r
            })
            .collect()
    };
    assert_eq!(strip_time(&from_file), strip_time(&inline));

    let o = run(&["verify", "--dataset", s(&ds), "--sets", "9", "--out", s(&inline)]);
    assert_eq!(code(&o), 2);
    let o = run(&["verify", "--dataset", s(&ds), "--out", s(&inline)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn autopilot_and_inspect_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 6, 90);
    let o = run(&["autopilot", "--dataset", s(&ds), "--put-number", "0", "--no-probe"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sug: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(sug["partition_size"], 3);
    assert_eq!(sug["vertical_expense"], 1.0);
    assert_eq!(sug["estimated_tasks"], 20);

    let o = run(&["inspect", s(&ds), "--dedupe", "remove"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["kind"], "dataset");
    assert_eq!((doc["n"].as_u64(), doc["m"].as_u64()), (Some(6), Some(90)));
    assert_eq!(doc["class"]["labels"], serde_json::json!(["no", "yes"]));
    assert_eq!(doc["clean"]["rows_in"], 90);
    assert!(doc["violations"].as_array().unwrap().is_empty());
}

#[test]
fn autopilot_flag_sets_expenses_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_toy(dir.path(), 4, 60);
    let base = [
        "run",
        "--dataset",
        s(&ds),
        "-k",
        "2",
        "--learner",
        "nb",
        "--vertical-expense",
        "0.5",
    ];
    let out = dir.path().join("a.csv");
    let o = run(&[&base[..], &["--autopilot", "--out", s(&out)]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_results_csv(&out).unwrap().len(), 3, "explicit v = 0.5 of 6 sets");
    let ckpt = putwb_core::engine::Checkpoint::load(&dir.path().join("a.csv.ckpt")).unwrap();
    assert!(ckpt.spec.autopilot);
    assert_eq!(ckpt.spec.config.vertical_expense, 0.5);
    assert_eq!(ckpt.spec.config.horizontal_expense, 1.0);
}
