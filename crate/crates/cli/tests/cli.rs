use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wann::data::{gen_uniform_shift_1d, write_csv, LabeledSample};
use wann::harness::Record;

fn wann() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wann"));
    cmd.env_remove("WANN_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.csv")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn record(path: &Path) -> Record {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn write_sample(path: &Path, sample: &LabeledSample, tags: Option<&[bool]>) {
    let mut buf = Vec::new();
    write_csv(&mut buf, sample, &["x".to_owned()], "y", tags).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn synth_bench_smoke_writes_three_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(wann()
        .args(["synth-bench", "--dims", "64", "--repeats", "1", "--epochs", "5", "--out"])
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr(&out));
    let runs: Vec<_> = fs::read_dir(dir.path().join("N64/runs")).unwrap().collect();
    assert_eq!(runs.len(), 3);
    assert!(dir.path().join("N64/table.csv").exists());
    assert!(dir.path().join("N64/plot.svg").exists());
    assert!(stdout(&out).contains("target-only"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(wann().args(["synth-bench", "--dims", "", "--out"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let out = run(wann().args(["synth-bench", "--bogus-flag"]));
    assert_eq!(out.status.code(), Some(2));
    let out = run(wann().args(["fit", "--method", "nope", "--train"]).arg(fixture()));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for m in ["wann", "uniform", "target-only", "kmm", "kliep", "tradaboost"] {
        assert!(err.contains(m), "{err}");
    }
    let out = run(wann().arg("--help"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn fit_uniform_on_fixture_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(wann()
        .args(["fit", "--method", "uniform", "--epochs", "20", "--hidden", "8", "--train"])
        .arg(fixture())
        .arg("--out")
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr(&out));
    let metrics = record(&dir.path().join("metrics.txt"));
    assert_eq!(metrics.get("evaluated_on"), Some("train-target"));
    assert_eq!(metrics.parse_required::<usize>("rows").unwrap(), 4);
    assert!(metrics.parse_required::<f64>("mse").unwrap().is_finite());
    let summary = record(&dir.path().join("summary.txt"));
    assert_eq!(summary.get("n_source"), Some("8"));
    assert_eq!(fs::read_to_string(dir.path().join("curve.csv")).unwrap().lines().count(), 21);
}

#[test]
fn fit_reports_csv_errors_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y,domain\n1,2,source\n3,oops,target\n").unwrap();
    let out = run(wann().args(["fit", "--method", "uniform", "--train"]).arg(&bad).arg("--out").arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains('2') && err.contains('y'), "{err}");
}

#[test]
fn fit_wann_writes_one_weight_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_uniform_shift_1d(60, 20, 0).unwrap();
    let train = dir.path().join("train.csv");
    write_sample(&train, &data.train.as_sample(), Some(&data.train.is_target));
    let out = run(wann()
        .args(["fit", "--method", "wann", "--epochs", "5", "--hidden", "8", "--batch-size", "16", "--train"])
        .arg(&train)
        .arg("--out")
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr(&out));
    let weights = fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 1 + 80);
}

#[test]
fn ydisc_identity_shift_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_uniform_shift_1d(100, 100, 1).unwrap();
    let src = dir.path().join("src.csv");
    let tgt = dir.path().join("tgt.csv");
    write_sample(&src, &data.train.source(), None);
    write_sample(&tgt, &data.train.target(), None);
    let est = |a: &Path, b: &Path| {
        let out = run(wann().args(["ydisc", "--hidden", "10", "--source"]).arg(a).arg("--target").arg(b));
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out).parse::<Record>().unwrap().parse_required::<f64>("value").unwrap()
    };
    assert!(est(&src, &src) <= 1e-6);
    assert!(est(&src, &tgt) > 0.0);
    let out = run(wann().args(["ydisc", "--source"]).arg(dir.path().join("none.csv")).arg("--target").arg(&tgt));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn demo_is_deterministic_and_fits_the_target() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(wann().args(["demo-negative-transfer", "--seed", "3", "--out"]).arg(d.path()));
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for f in ["fits.csv", "train.csv", "plot.svg", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let svg = fs::read_to_string(a.path().join("plot.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    let summary = record(&a.path().join("summary.txt"));
    assert!(summary.parse_required::<f64>("uniform_target_mse").unwrap() < 0.05);
    assert!(summary.parse_required::<f64>("wann_target_mse").unwrap() < 0.05);
    let fits = fs::read_to_string(a.path().join("fits.csv")).unwrap();
    assert_eq!(fits.lines().next(), Some("x,truth,uniform,wann"));
}

#[test]
fn flags_override_config_which_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# fit options\nepochs = 3\nhidden = 4\nmethod = uniform\n").unwrap();
    let summary_for = |extra: &[&str], env_seed: Option<&str>, config_path: &Path| {
        let out_dir = dir.path().join("out");
        let mut cmd = wann();
        cmd.arg("--config").arg(config_path).arg("fit").arg("--train").arg(fixture()).arg("--out").arg(&out_dir);
        cmd.args(extra);
        if let Some(s) = env_seed {
            cmd.env("WANN_SEED", s);
        }
        let out = run(&mut cmd);
        assert!(out.status.success(), "{}", stderr(&out));
        record(&out_dir.join("summary.txt"))
    };
    let s = summary_for(&[], None, &config);
    assert_eq!((s.get("epochs"), s.get("hidden"), s.get("seed")), (Some("3"), Some("4"), Some("0")));
    let s = summary_for(&["--epochs", "2"], Some("9"), &config);
    assert_eq!((s.get("epochs"), s.get("seed")), (Some("2"), Some("9")));
    let with_seed = dir.path().join("seeded.conf");
    fs::write(&with_seed, "epochs = 3\nmethod = uniform\nseed = 5\n").unwrap();
    let s = summary_for(&[], Some("9"), &with_seed);
    assert_eq!(s.get("seed"), Some("5"));
    let s = summary_for(&["--seed", "1"], Some("9"), &with_seed);
    assert_eq!(s.get("seed"), Some("1"));
}

#[test]
fn config_problems_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "epochz = 3\n").unwrap();
    let out = run(wann().arg("--config").arg(&config).args(["synth-bench", "--dims", "8"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epochz"));
    fs::write(&config, "epochs = many\n").unwrap();
    let out = run(wann().arg("--config").arg(&config).args(["synth-bench", "--dims", "8", "--out"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epochs"));
    let out = run(wann().args(["synth-bench", "--dims", "8", "--out"]).arg(dir.path()).env("WANN_SEED", "x"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("WANN_SEED"));
    assert!(!dir.path().join("N8").exists());
}
