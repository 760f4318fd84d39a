//! `wann` command-line tool.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.
//! Option values come from, in order of priority: the command line, the file
//! given with `--config`, the `WANN_SEED` environment variable (seed only),
//! and built-in defaults.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use wann::baselines::uniform_fit;
use wann::data::{gen_uniform_shift_1d, load_csv, CortesSyntheticSpec, CsvSchema, LabeledSample};
use wann::harness::svg::{Chart, Series};
use wann::harness::{
    compute_metrics, format_real, run_experiment, run_method, run_to_record, ExperimentConfig, Method, MethodSpec,
    Record, Scenario, TrainingSettings,
};
use wann::nn::{Architecture, FitConfig, Mode};
use wann::wann::{
    estimate_y_discrepancy, train_wann, Clips, DiscrepancyBudget, WannConfig, WeightedSample,
};

#[derive(Parser, Debug)]
#[command(name = "wann", version, about = "Weighting adversarial networks for regression under covariate shift")]
struct Cli {
    /// Key-value file supplying option defaults; keys are the long option names.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic mixture benchmark: WANN, uniform weighting and target only, per input dimension.
    SynthBench(SynthBenchArgs),
    /// Train one method on a CSV with a domain column.
    Fit(FitArgs),
    /// Estimate the Y-discrepancy between a (weighted) source CSV and a target CSV.
    Ydisc(YdiscArgs),
    /// One-dimensional shifted-support example with uniform weighting and WANN fits.
    DemoNegativeTransfer(DemoArgs),
}

#[derive(Args, Debug, Default)]
struct NetArgs {
    /// Hidden layer widths, comma separated [default: 100,100].
    #[arg(long)]
    hidden: Option<String>,
    /// Weight clipping constant of the task networks [default: 1].
    #[arg(long)]
    clip: Option<f64>,
    /// Training epochs [default: 300; 100 for ydisc].
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 128].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Seed [default: $WANN_SEED or 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SynthBenchArgs {
    /// Input dimensions, comma separated [default: 32,64,128,256].
    #[arg(long)]
    dims: Option<String>,
    /// Repeats per dimension [default: 10].
    #[arg(long)]
    repeats: Option<usize>,
    /// Source sample size m [default: 1000].
    #[arg(long)]
    m: Option<usize>,
    /// Clipping constant of the weighting network [default: same as --clip].
    #[arg(long)]
    clip_q: Option<f64>,
    /// Worker threads for repeats [default: 1].
    #[arg(long)]
    parallel: Option<usize>,
    /// Output directory; one N<dim> subdirectory per dimension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodName {
    Wann,
    Uniform,
    TargetOnly,
    Kmm,
    Kliep,
    Tradaboost,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Method to train.
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Training CSV with source and target rows.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Optional CSV of labelled target rows to evaluate on.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Label column [default: y].
    #[arg(long)]
    target_col: Option<String>,
    /// Domain column, values source/target [default: domain].
    #[arg(long)]
    domain_col: Option<String>,
    /// Feature columns, comma separated [default: every other column].
    #[arg(long)]
    features: Option<String>,
    /// Standardize inputs using the source rows.
    #[arg(long)]
    scale: bool,
    /// Clipping constant of the weighting network for wann [default: same as --clip].
    #[arg(long)]
    clip_q: Option<f64>,
    /// Gaussian kernel bandwidth for kmm and kliep [default: median distance].
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Boosting rounds for tradaboost [default: 10].
    #[arg(long)]
    iterations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args, Debug)]
struct YdiscArgs {
    /// Source CSV (features and label).
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target CSV with the same feature columns.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Label column in both files [default: y].
    #[arg(long)]
    target_col: Option<String>,
    /// Source weight column; weights are rescaled to sum to one [default: uniform].
    #[arg(long)]
    weight_col: Option<String>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Source rows from U[0,2] [default: 200].
    #[arg(long)]
    m: Option<usize>,
    /// Target rows from U[1,3] [default: 50].
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<wann::Error> for CliError {
    fn from(e: wann::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Merges command-line values with the config file and defaults.
struct Resolver {
    file: Record,
}

const NET_KEYS: [&str; 6] = ["hidden", "clip", "epochs", "batch-size", "lr", "seed"];

impl Resolver {
    fn load(path: Option<&Path>, allowed: &[&str]) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self { file: Record::new() });
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        let file: Record = text
            .parse()
            .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        if let Some(key) = file.keys().find(|k| !allowed.contains(k) && !NET_KEYS.contains(k)) {
            return Err(usage(format!("unknown key `{key}` in config file {}", path.display())));
        }
        Ok(Self { file })
    }

    fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .parse(key)
            .map_err(|_| usage(format!("config key `{key}` has an invalid value")))
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.value(flag, key)?.unwrap_or(default))
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        self.value(flag, key)?
            .ok_or_else(|| usage(format!("--{key} is required")))
    }

    fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(s) = self.value(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var("WANN_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| usage(format!("WANN_SEED must be an unsigned integer, got {v:?}"))),
            Err(_) => Ok(0),
        }
    }

    fn settings(&self, net: &NetArgs) -> CliResult<TrainingSettings> {
        let mut s = TrainingSettings::default();
        if let Some(h) = self.value(net.hidden.clone(), "hidden")? {
            s.hidden = if h.trim().is_empty() { Vec::new() } else { parse_list(&h, "hidden")? };
        }
        s.clip = Some(self.or(net.clip, "clip", 1.0)?);
        s.epochs = self.or(net.epochs, "epochs", s.epochs)?;
        s.batch_size = self.or(net.batch_size, "batch-size", s.batch_size)?;
        s.adam.lr = self.or(net.lr, "lr", s.adam.lr)?;
        if s.hidden.contains(&0) {
            return Err(usage("hidden layer widths must be positive"));
        }
        if !matches!(s.clip, Some(c) if c > 0.0 && c.is_finite()) {
            return Err(usage("--clip must be positive"));
        }
        if s.epochs == 0 || s.batch_size == 0 {
            return Err(usage("--epochs and --batch-size must be positive"));
        }
        if !(s.adam.lr > 0.0 && s.adam.lr.is_finite()) {
            return Err(usage("--lr must be positive"));
        }
        Ok(s)
    }
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    if text.trim().is_empty() {
        return Err(usage(format!("--{what} needs at least one value")));
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| usage(format!("invalid --{what} entry {:?}", v.trim())))
        })
        .collect()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn synth_bench(args: SynthBenchArgs, config: Option<&Path>) -> CliResult<()> {
    let r = Resolver::load(config, &["dims", "repeats", "m", "clip-q", "parallel", "out"])?;
    let dims: Vec<usize> = parse_list(&r.or(args.dims, "dims", "32,64,128,256".to_owned())?, "dims")?;
    if dims.contains(&0) {
        return Err(usage("--dims entries must be positive"));
    }
    let repeats = r.or(args.repeats, "repeats", 10)?;
    let m = r.or(args.m, "m", 1000)?;
    let parallel = r.or(args.parallel, "parallel", 1)?;
    if repeats == 0 || m == 0 || parallel == 0 {
        return Err(usage("--repeats, --m and --parallel must be positive"));
    }
    let clip_q: Option<f64> = r.value(args.clip_q, "clip-q")?;
    if clip_q.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
        return Err(usage("--clip-q must be positive"));
    }
    let out = r.path(args.out, "out")?;
    let seed = r.seed(args.net.seed)?;
    let training = r.settings(&args.net)?;

    let wann = Method::Wann {
        clip_q,
        pretrain_epochs: WannConfig::default().pretrain_epochs,
        stratified: false,
    };
    let methods: Vec<MethodSpec> = vec![wann.into(), Method::Uniform.into(), Method::TargetOnly.into()];
    for dim in dims {
        let defaults = CortesSyntheticSpec::new(dim, seed);
        let dir = out.join(format!("N{dim}"));
        let config = ExperimentConfig {
            scenario: Scenario::CortesSynthetic {
                dim,
                m,
                target_fraction: defaults.target_fraction,
                n_validation: defaults.n_validation,
            },
            methods: methods.clone(),
            n_repeats: repeats,
            base_seed: seed,
            training: training.clone(),
            output_dir: Some(dir.clone()),
            parallel,
        };
        eprintln!("N={dim}: {repeats} repeats, writing {}", dir.display());
        let outcome = run_experiment(&config)?;
        for res in outcome.results.iter().filter(|r| !r.is_ok()) {
            eprintln!("  {} seed {} failed: {:?}", res.method, res.seed, res.status);
        }
        println!("# N = {dim}");
        print!("{}", outcome.table.to_csv());
    }
    Ok(())
}

fn method_of(name: MethodName, args: &FitArgs, r: &Resolver) -> CliResult<Method> {
    let bandwidth: Option<f64> = r.value(args.bandwidth, "bandwidth")?;
    if bandwidth.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
        return Err(usage("--bandwidth must be positive"));
    }
    Ok(match name {
        MethodName::Wann => Method::Wann {
            clip_q: r.value(args.clip_q, "clip-q")?,
            pretrain_epochs: WannConfig::default().pretrain_epochs,
            stratified: false,
        },
        MethodName::Uniform => Method::Uniform,
        MethodName::TargetOnly => Method::TargetOnly,
        MethodName::Kmm => Method::Kmm(wann::baselines::KmmConfig {
            kernel_bandwidth: bandwidth,
            ..Default::default()
        }),
        MethodName::Kliep => Method::Kliep(wann::baselines::KliepConfig {
            kernel_bandwidth: bandwidth,
            ..Default::default()
        }),
        MethodName::Tradaboost => Method::Tradaboost {
            n_iterations: r.or(args.iterations, "iterations", 10)?,
        },
    })
}

fn fit(args: FitArgs, config: Option<&Path>) -> CliResult<()> {
    let r = Resolver::load(
        config,
        &[
            "method", "train", "test", "target-col", "domain-col", "features", "scale", "clip-q", "bandwidth",
            "iterations", "out",
        ],
    )?;
    let name = match args.method {
        Some(m) => m,
        None => {
            let text: String = r.value(None, "method")?.ok_or_else(|| usage("--method is required"))?;
            MethodName::from_str(&text, false).map_err(|_| {
                usage(format!("unknown method {text:?}; valid methods: {}", Method::NAMES.join(", ")))
            })?
        }
    };
    let method = method_of(name, &args, &r)?;
    let train = r.path(args.train.clone(), "train")?;
    let test: Option<PathBuf> = r.value(args.test.clone(), "test")?;
    let out = r.path(args.out.clone(), "out")?;
    let label = r.or(args.target_col.clone(), "target-col", "y".to_owned())?;
    let domain = r.or(args.domain_col.clone(), "domain-col", "domain".to_owned())?;
    let features: Option<String> = r.value(args.features.clone(), "features")?;
    let scale = args.scale || r.or(None, "scale", false)?;
    let seed = r.seed(args.net.seed)?;
    let settings = r.settings(&args.net)?;

    let mut schema = CsvSchema::new(label).with_domain(domain);
    if let Some(f) = features {
        schema = schema.with_features(parse_list(&f, "features")?);
    }
    let evaluated_on = if test.is_some() { "test" } else { "train-target" };
    let scenario = Scenario::Csv {
        train,
        test,
        schema,
        scale,
    };
    let data = scenario.generate(seed)?;
    let spec = MethodSpec::from(method);
    let result = run_method(&spec, &data, &settings, seed);
    if let wann::harness::RunStatus::Failed(msg) = &result.status {
        return Err(CliError::Runtime(format!("{} failed: {msg}", spec.name)));
    }

    create_dir(&out)?;
    let mut summary = Record::new();
    summary.set("method", &spec.name);
    summary.set("seed", seed);
    summary.set("n_source", data.train.n_source());
    summary.set("n_target", data.train.n_target());
    summary.set("n_features", data.train.dim());
    summary.set(
        "hidden",
        settings.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    summary.set_real("clip", settings.clip.unwrap_or(f64::INFINITY));
    summary.set("epochs", settings.epochs);
    summary.set("batch-size", settings.batch_size);
    summary.set("scaled", scale);
    write_file(&out.join("summary.txt"), &summary.to_string())?;

    let mut metrics = Record::new();
    metrics.set("evaluated_on", evaluated_on);
    metrics.set("rows", data.evaluation.len());
    metrics.set_real("mse", result.mse);
    metrics.set_real("mae", result.mae);
    write_file(&out.join("metrics.txt"), &metrics.to_string())?;
    write_file(&out.join("run.txt"), &run_to_record(&result).to_string())?;

    if let Some(w) = &result.weights {
        let mut text = String::from("row,domain,weight\n");
        for (i, (w, t)) in w.iter().zip(&data.train.is_target).enumerate() {
            let _ = writeln!(text, "{i},{},{}", if *t { "target" } else { "source" }, format_real(*w));
        }
        write_file(&out.join("weights.csv"), &text)?;
    }
    if !result.curve.is_empty() {
        let mut text = String::from("epoch,mse\n");
        for (e, v) in result.curve.iter().enumerate() {
            let _ = writeln!(text, "{},{}", e + 1, format_real(*v));
        }
        write_file(&out.join("curve.csv"), &text)?;
    }
    print!("{metrics}");
    Ok(())
}

fn ydisc(args: YdiscArgs, config: Option<&Path>) -> CliResult<()> {
    let r = Resolver::load(config, &["source", "target", "target-col", "weight-col"])?;
    let source_path = r.path(args.source, "source")?;
    let target_path = r.path(args.target, "target")?;
    let label = r.or(args.target_col, "target-col", "y".to_owned())?;
    let weight_col: Option<String> = r.value(args.weight_col, "weight-col")?;
    let seed = r.seed(args.net.seed)?;
    let mut settings = r.settings(&args.net)?;
    if args.net.epochs.is_none() && r.file.get("epochs").is_none() {
        settings.epochs = DiscrepancyBudget::default().epochs;
    }

    let target = load_csv(&target_path, &CsvSchema::new(label.clone()))?;
    let features = target.feature_names.clone();
    let (source, weights) = match &weight_col {
        None => {
            let s = load_csv(&source_path, &CsvSchema::new(label).with_features(features))?.sample;
            let w = Array1::from_elem(s.len(), 1.0 / s.len() as f64);
            (s, w)
        }
        Some(col) => {
            let s = load_csv(&source_path, &CsvSchema::new(label).with_features(features.clone()))?.sample;
            let w = load_csv(&source_path, &CsvSchema::new(col.clone()).with_features(features))?
                .sample
                .y;
            if w.iter().any(|v| *v < 0.0) {
                return Err(CliError::Runtime(format!("column {col} has negative weights")));
            }
            let total = w.sum();
            if !(total > 0.0) {
                return Err(CliError::Runtime(format!("column {col} sums to zero")));
            }
            (s, w / total)
        }
    };
    let arch: Architecture = settings.architecture(source.dim());
    let budget = DiscrepancyBudget {
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        seed,
        adam: settings.adam,
    };
    let weighted = WeightedSample {
        x: source.x.view(),
        y: source.y.view(),
        w: weights.view(),
    };
    let est = estimate_y_discrepancy(weighted, &target.sample, &arch, &budget, &[])?;
    let mut rec = Record::new();
    rec.set_real("value", est.value);
    rec.set_real("plus", est.plus);
    rec.set_real("minus", est.minus);
    print!("{rec}");
    Ok(())
}

fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("one column")
}

fn demo(args: DemoArgs, config: Option<&Path>) -> CliResult<()> {
    let r = Resolver::load(config, &["m", "n", "out"])?;
    let m = r.or(args.m, "m", 200)?;
    let n = r.or(args.n, "n", 50)?;
    if m == 0 || n == 0 {
        return Err(usage("--m and --n must be positive"));
    }
    let out = r.path(args.out, "out")?;
    let seed = r.seed(args.net.seed)?;
    let settings = r.settings(&args.net)?;

    let data = gen_uniform_shift_1d(m, n, seed)?;
    let train = &data.train;
    let arch = settings.architecture(1);
    let grid = data.grid.to_vec();
    let grid_x = column(&grid);
    let tgt_grid: Vec<f64> = grid.iter().copied().filter(|x| (1.0..=3.0).contains(x)).collect();
    let tgt_eval = LabeledSample::new(column(&tgt_grid), Array1::from(tgt_grid.clone()))?;

    let fit_cfg = FitConfig {
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        adam: settings.adam,
        seed,
    };
    let uniform = uniform_fit(train, &arch, &fit_cfg, None)?;
    let wann_cfg = WannConfig {
        epochs: settings.epochs,
        batch_size: settings.batch_size.min(train.len()),
        adam: settings.adam,
        seed,
        ..WannConfig::default()
    };
    let clip = settings.clip.unwrap_or(1.0);
    let (model, _) = train_wann(&arch, Clips::uniform(clip), train, &wann_cfg, None)?;

    let u_grid = uniform.net.forward(grid_x.view(), Mode::Eval)?;
    let w_grid = model.predict(grid_x.view())?;
    let u_tgt = compute_metrics(uniform.net.forward(tgt_eval.x.view(), Mode::Eval)?.view(), tgt_eval.y.view())?;
    let w_tgt = compute_metrics(model.predict(tgt_eval.x.view())?.view(), tgt_eval.y.view())?;
    let weights = model.training_weights(train.x.view())?.normalized;

    create_dir(&out)?;
    let mut fits = String::from("x,truth,uniform,wann\n");
    for (i, x) in grid.iter().enumerate() {
        let _ = writeln!(
            fits,
            "{},{},{},{}",
            format_real(*x),
            format_real(*x),
            format_real(u_grid[i]),
            format_real(w_grid[i])
        );
    }
    write_file(&out.join("fits.csv"), &fits)?;
    let mut rows = String::from("x,y,domain,wann_weight\n");
    for i in 0..train.len() {
        let _ = writeln!(
            rows,
            "{},{},{},{}",
            format_real(train.x[[i, 0]]),
            format_real(train.y[i]),
            if train.is_target[i] { "target" } else { "source" },
            format_real(weights[i])
        );
    }
    write_file(&out.join("train.csv"), &rows)?;

    let mut chart = Chart::new("Shifted supports, y = x", "x", "y");
    let pts = |target: bool| -> Vec<(f64, f64)> {
        (0..train.len())
            .filter(|&i| train.is_target[i] == target)
            .map(|i| (train.x[[i, 0]], train.y[i]))
            .collect()
    };
    chart.push(Series::markers("source rows", pts(false)));
    chart.push(Series::markers("target rows", pts(true)));
    chart.push(Series::line("y = x", grid.iter().map(|x| (*x, *x)).collect()));
    chart.push(Series::line("uniform", grid.iter().zip(&u_grid).map(|(x, y)| (*x, *y)).collect()));
    chart.push(Series::line("wann", grid.iter().zip(&w_grid).map(|(x, y)| (*x, *y)).collect()));
    write_file(&out.join("plot.svg"), &chart.to_svg())?;

    let mut summary = Record::new();
    summary.set("seed", seed);
    summary.set("m", m);
    summary.set("n", n);
    summary.set_real("uniform_target_mse", u_tgt.mse);
    summary.set_real("wann_target_mse", w_tgt.mse);
    summary.set_real("uniform_target_mae", u_tgt.mae);
    summary.set_real("wann_target_mae", w_tgt.mae);
    write_file(&out.join("summary.txt"), &summary.to_string())?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout with status 0, the rest is a usage error
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = cli.config.as_deref();
    let outcome = match cli.command {
        Command::SynthBench(a) => synth_bench(a, config),
        Command::Fit(a) => fit(a, config),
        Command::Ydisc(a) => ydisc(a, config),
        Command::DemoNegativeTransfer(a) => demo(a, config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
