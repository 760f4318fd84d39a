use std::fs;
use std::path::Path;

use ndarray::Array1;
use wann::data::CsvSchema;
use proptest::prelude::*;
use wann::harness::{
    compute_metrics, export_results, parse_run, read_runs, run_experiment, run_to_record, weight_histogram,
    ExperimentConfig, Method, MethodSpec, RunResult, RunStatus, Scenario, TrainingSettings, HISTOGRAM_BINS,
};

fn quick_config(methods: Vec<MethodSpec>) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(Scenario::UniformShift1d { m: 60, n: 20 }, methods);
    config.n_repeats = 2;
    config.base_seed = 5;
    config.training = TrainingSettings {
        hidden: vec![8],
        epochs: 6,
        batch_size: 16,
        ..TrainingSettings::default()
    };
    config
}

fn all_methods() -> Vec<MethodSpec> {
    Method::NAMES
        .iter()
        .map(|n| {
            let method = match Method::from_name(n).unwrap() {
                Method::Tradaboost { .. } => Method::Tradaboost { n_iterations: 2 },
                Method::Wann { clip_q, stratified, .. } => Method::Wann {
                    clip_q,
                    pretrain_epochs: 5,
                    stratified,
                },
                other => other,
            };
            MethodSpec::from(method)
        })
        .collect()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn every_method_and_repeat_appears_once() {
    let outcome = run_experiment(&quick_config(all_methods())).unwrap();
    assert_eq!(outcome.results.len(), Method::NAMES.len() * 2);
    for name in Method::NAMES {
        let seeds: Vec<u64> = outcome.results.iter().filter(|r| r.method == *name).map(|r| r.seed).collect();
        assert_eq!(seeds, vec![5, 6], "{name}");
    }
    for r in &outcome.results {
        assert!(r.is_ok(), "{}: {:?}", r.method, r.status);
        let w = r.weights.as_ref().unwrap();
        assert_eq!(w.len(), 80);
        assert!((w.iter().sum::<f64>() / 80.0 - 1.0).abs() < 1e-9, "{}", r.method);
        assert!(w.iter().all(|v| *v >= 0.0));
    }
    assert_eq!(outcome.table.rows.len(), Method::NAMES.len());
}

#[test]
fn outputs_round_trip_and_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut config = quick_config(vec![Method::wann().into(), Method::Uniform.into(), Method::TargetOnly.into()]);
    config.output_dir = Some(a.path().to_path_buf());
    let outcome = run_experiment(&config).unwrap();
    config.output_dir = Some(b.path().to_path_buf());
    config.parallel = 2;
    run_experiment(&config).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));

    let mut back = read_runs(a.path()).unwrap();
    for r in &mut back {
        r.wall_seconds = None;
    }
    let mut expected = outcome.results.clone();
    for r in &mut expected {
        r.wall_seconds = None;
    }
    assert_eq!(back, expected);

    for r in &outcome.results {
        let curve = fs::read_to_string(a.path().join(format!("curves/{}_{}.csv", r.method, r.seed))).unwrap();
        assert_eq!(curve.lines().count(), config.training.epochs + 1);
        let hist = fs::read_to_string(a.path().join(format!("weights/{}_{}.csv", r.method, r.seed))).unwrap();
        let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 80);
    }
    let svg = fs::read_to_string(a.path().join("plot.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 3);

    // table statistics recomputed from the persisted runs
    let table = fs::read_to_string(a.path().join("table.csv")).unwrap();
    for row in table.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let mse: Vec<f64> = back.iter().filter(|r| r.method == cols[0]).map(|r| r.mse).collect();
        let mean = mse.iter().sum::<f64>() / mse.len() as f64;
        let sd = (mse.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mse.len() - 1) as f64).sqrt();
        assert_eq!(cols[3].parse::<f64>().unwrap(), mean);
        assert!((cols[4].parse::<f64>().unwrap() - sd).abs() <= 1e-15 * (1.0 + sd));
    }
}

#[test]
fn failures_are_recorded_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    let rows: String = (0..30).map(|i| format!("{},{},0\n", i as f64 / 10.0, i as f64 / 5.0)).collect();
    fs::write(&train, format!("x,y,domain\n{rows}")).unwrap();
    fs::write(&test, "x,y,domain\n0.5,1.0,1\n1.5,3.0,1\n").unwrap();
    let mut config = quick_config(vec![Method::Uniform.into(), Method::TargetOnly.into()]);
    config.scenario = Scenario::Csv {
        train,
        test: Some(test),
        schema: CsvSchema::new("y").with_domain("domain"),
        scale: false,
    };
    let outcome = run_experiment(&config).unwrap();
    assert_eq!(outcome.results.len(), 4);
    for r in &outcome.results {
        assert_eq!(r.is_ok(), r.method == "uniform", "{}: {:?}", r.method, r.status);
    }
    for r in outcome.results.iter().filter(|r| !r.is_ok()) {
        assert!(r.mse.is_nan());
        let back = parse_run(&run_to_record(r).to_string()).unwrap();
        assert_eq!(back.status, r.status);
    }
    let row = outcome.table.get("target-only").unwrap();
    assert_eq!((row.n_ok, row.n_failed, row.rank), (0, 2, 2));
    assert_eq!(outcome.table.get("uniform").unwrap().rank, 1);
}

#[test]
fn single_uniform_repeat() {
    let mut config = quick_config(vec![Method::Uniform.into()]);
    config.n_repeats = 1;
    let outcome = run_experiment(&config).unwrap();
    assert_eq!(outcome.results.len(), 1);
    assert_eq!(outcome.table.rows.len(), 1);
    assert_eq!(outcome.table.rows[0].mse_std, 0.0);
}

#[test]
fn export_needs_results_and_a_writable_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(export_results(&[], dir.path()).is_err());
    let file = dir.path().join("file");
    fs::write(&file, "x").unwrap();
    let r = RunResult::failed("uniform", 0, "x".into());
    assert!(export_results(&[r], &file).is_err());
}

#[test]
fn histogram_counts_every_row() {
    let w = [0.0, 0.5, 1.0, 3.0, 3.0, 2.2];
    let g = [true, false, false, true, false, true];
    let h = weight_histogram(&w, &g);
    assert_eq!(h.len(), HISTOGRAM_BINS);
    assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 6);
    assert_eq!(h.iter().map(|b| b.3).sum::<usize>(), 3);
    assert_eq!(h.last().unwrap().2, 2);
}

#[test]
fn metrics_by_formula() {
    let m = compute_metrics(Array1::from(vec![0.0, 0.0]).view(), Array1::from(vec![1.0, -1.0]).view()).unwrap();
    assert_eq!((m.mse, m.mae), (1.0, 1.0));
    let y = Array1::from(vec![0.3, -2.0]);
    let m = compute_metrics(y.view(), y.view()).unwrap();
    assert_eq!((m.mse, m.mae), (0.0, 0.0));
}

proptest! {
    #[test]
    fn mse_dominates_squared_mae(pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..50)) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = compute_metrics(Array1::from(p).view(), Array1::from(y).view()).unwrap();
        prop_assert!(m.mse >= m.mae * m.mae * (1.0 - 1e-12));
    }

    #[test]
    fn run_files_round_trip(
        seed in any::<u64>(),
        curve in prop::collection::vec(-1e6..1e6f64, 0..20),
        mse in 0.0..1e3f64,
        weights in prop::collection::vec((0.0..10.0f64, any::<bool>()), 0..20),
    ) {
        let (w, g): (Vec<f64>, Vec<bool>) = weights.into_iter().unzip();
        let r = RunResult {
            method: "wann".into(),
            seed,
            status: RunStatus::Ok,
            curve,
            mse,
            mae: mse.sqrt(),
            weights: Some(w),
            weight_groups: Some(g),
            wall_seconds: None,
        };
        let back = parse_run(&run_to_record(&r).to_string()).unwrap();
        prop_assert_eq!(back, r);
    }
}
