use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{curve_band, RunResult, RunStatus};
use super::record::{format_real, Record};
use super::svg::{Chart, Series};
use super::table::ComparisonTable;
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

pub fn run_to_record(result: &RunResult) -> Record {
    let mut r = Record::new();
    r.set("method", &result.method);
    r.set("seed", result.seed);
    match &result.status {
        RunStatus::Ok => r.set("status", "ok"),
        RunStatus::Failed(msg) => {
            r.set("status", "failed");
            r.set("error", msg);
        }
    }
    r.set_real("mse", result.mse);
    r.set_real("mae", result.mae);
    r.set("epochs", result.curve.len());
    r.set_reals("curve", &result.curve);
    if let Some(w) = &result.weights {
        r.set_reals("weights", w);
    }
    if let Some(g) = &result.weight_groups {
        r.set("weight_groups", g.iter().map(|&t| if t { '1' } else { '0' }).collect::<String>());
    }
    r
}

pub fn run_from_record(record: &Record) -> Result<RunResult> {
    let bad = |message: String| Error::Record { line: 0, message };
    let status = match record.require("status")? {
        "ok" => RunStatus::Ok,
        "failed" => RunStatus::Failed(record.get("error").unwrap_or_default().to_owned()),
        other => return Err(bad(format!("unknown status {other:?}"))),
    };
    let curve: Vec<f64> = record.parse_list("curve")?.unwrap_or_default();
    let epochs: usize = record.parse_required("epochs")?;
    if epochs != curve.len() {
        return Err(bad(format!("epochs is {epochs} but the curve has {} points", curve.len())));
    }
    let weights: Option<Vec<f64>> = record.parse_list("weights")?;
    let weight_groups = record
        .get("weight_groups")
        .map(|s| {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad(format!("invalid weight group flag {c:?}"))),
                })
                .collect::<Result<Vec<bool>>>()
        })
        .transpose()?;
    if let (Some(w), Some(g)) = (&weights, &weight_groups) {
        if w.len() != g.len() {
            return Err(bad("weights and weight_groups differ in length".into()));
        }
    }
    Ok(RunResult {
        method: record.require("method")?.to_owned(),
        seed: record.parse_required("seed")?,
        status,
        curve,
        mse: record.parse_required("mse")?,
        mae: record.parse_required("mae")?,
        weights,
        weight_groups,
        wall_seconds: None,
    })
}

pub fn parse_run(text: &str) -> Result<RunResult> {
    run_from_record(&text.parse()?)
}

pub fn read_run_file(path: impl AsRef<Path>) -> Result<RunResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text)
}

/// Every run file under `<dir>/runs`, sorted by method then seed.
pub fn read_runs(dir: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let runs = dir.as_ref().join("runs");
    let mut out = Vec::new();
    for entry in fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))? {
        let path = entry.map_err(|e| Error::io(&runs, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            out.push(read_run_file(&path)?);
        }
    }
    super::experiment::sort_results(&mut out);
    Ok(out)
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `(low, high, count, target count)` over `HISTOGRAM_BINS` equal bins spanning `[0, max weight]`.
pub fn weight_histogram(weights: &[f64], groups: &[bool]) -> Vec<(f64, f64, usize, usize)> {
    let top = weights.iter().copied().filter(|w| w.is_finite()).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let width = top / HISTOGRAM_BINS as f64;
    let mut bins: Vec<(f64, f64, usize, usize)> = (0..HISTOGRAM_BINS)
        .map(|k| (k as f64 * width, (k + 1) as f64 * width, 0, 0))
        .collect();
    for (w, &t) in weights.iter().zip(groups) {
        let k = if w.is_finite() {
            ((w.max(0.0) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            HISTOGRAM_BINS - 1
        };
        bins[k].2 += 1;
        if t {
            bins[k].3 += 1;
        }
    }
    bins
}

fn stem(result: &RunResult) -> String {
    format!("{}_{}", result.method, result.seed)
}

/// Writes `runs/<method>_<seed>.txt` for every result, `table.csv`,
/// `curves/<method>_<seed>.csv` for results with a curve, and
/// `weights/<method>_<seed>.csv` weight histograms.
pub fn export_results(results: &[RunResult], dir: impl AsRef<Path>) -> Result<()> {
    if results.is_empty() {
        return Err(Error::invalid("no results to export"));
    }
    let dir = dir.as_ref();
    let runs = dir.join("runs");
    let curves = dir.join("curves");
    let weights = dir.join("weights");
    create_dir(&runs)?;
    for r in results {
        write(runs.join(format!("{}.txt", stem(r))), &run_to_record(r).to_string())?;
        if !r.curve.is_empty() {
            create_dir(&curves)?;
            let mut text = String::from("epoch,mse\n");
            for (e, v) in r.curve.iter().enumerate() {
                let _ = writeln!(text, "{},{}", e + 1, format_real(*v));
            }
            write(curves.join(format!("{}.csv", stem(r))), &text)?;
        }
        if let (Some(w), Some(g)) = (&r.weights, &r.weight_groups) {
            create_dir(&weights)?;
            let mut text = String::from("bin_low,bin_high,count,target_count\n");
            for (lo, hi, c, t) in weight_histogram(w, g) {
                let _ = writeln!(text, "{},{},{c},{t}", format_real(lo), format_real(hi));
            }
            write(weights.join(format!("{}.csv", stem(r))), &text)?;
        }
    }
    write(dir.join("table.csv"), &ComparisonTable::from_results(results).to_csv())
}

/// Mean evaluation-MSE curve per method with a ±1 standard deviation band.
pub fn curve_chart(results: &[RunResult], title: &str) -> Chart {
    let mut names: Vec<&str> = results.iter().map(|r| r.method.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let mut chart = Chart::new(title, "epoch", "target MSE");
    for name in names {
        let band = curve_band(results, name);
        if band.is_empty() {
            continue;
        }
        let x = |e: usize| (e + 1) as f64;
        let mut s = Series::line(name, band.iter().enumerate().map(|(e, (m, _))| (x(e), *m)).collect());
        s.band = Some(band.iter().enumerate().map(|(e, (m, sd))| (x(e), m - sd, m + sd)).collect());
        chart.push(s);
    }
    chart
}

/// Writes `plot.svg` with the learning curves of `results`.
pub fn emit_plot_data(results: &[RunResult], dir: impl AsRef<Path>) -> Result<()> {
    if results.is_empty() {
        return Err(Error::invalid("no results to plot"));
    }
    let dir = dir.as_ref();
    create_dir(dir)?;
    let chart = curve_chart(results, "Target MSE by epoch (mean ± 1 sd)");
    write(dir.join("plot.svg"), &chart.to_svg())
}
