use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::metrics::compute_metrics;
use super::table::ComparisonTable;
use crate::baselines::{
    fit_with_source_weights, kliep_weights, kmm_weights, target_only_fit, tradaboost_r2_fit, uniform_fit,
    BaselineFit, KliepConfig, KmmConfig, TradaboostConfig,
};
use crate::data::{
    gen_cortes_synthetic, gen_uniform_shift_1d, load_csv, CortesSyntheticSpec, CsvSchema, LabeledSample, ScalerState,
    TrainingSet,
};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Architecture, FitConfig, Mode};
use crate::wann::{train_wann, Clips, WannConfig};

/// Where each repeat's data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Gaussian mixture source, single gaussian target; evaluated on the
    /// generated validation sample.
    CortesSynthetic {
        dim: usize,
        m: usize,
        target_fraction: f64,
        n_validation: usize,
    },
    /// `U[0,2] → U[1,3]` identity task; evaluated on the grid points inside the target support.
    UniformShift1d { m: usize, n: usize },
    /// Training rows from a CSV with a domain column; evaluated on `test`, or
    /// on the training target rows when no test file is given. With `scale`,
    /// inputs are standardized using the source rows.
    Csv {
        train: PathBuf,
        test: Option<PathBuf>,
        schema: CsvSchema,
        scale: bool,
    },
}

impl Scenario {
    pub fn cortes(dim: usize) -> Self {
        let d = CortesSyntheticSpec::new(dim, 0);
        Scenario::CortesSynthetic {
            dim,
            m: d.m,
            target_fraction: d.target_fraction,
            n_validation: d.n_validation,
        }
    }
}

/// One repeat's data, shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub train: TrainingSet,
    pub evaluation: LabeledSample,
}

impl Scenario {
    pub fn generate(&self, seed: u64) -> Result<ScenarioData> {
        match self {
            Scenario::CortesSynthetic {
                dim,
                m,
                target_fraction,
                n_validation,
            } => {
                let spec = CortesSyntheticSpec {
                    dim: *dim,
                    m: *m,
                    target_fraction: *target_fraction,
                    n_validation: *n_validation,
                    seed,
                };
                let data = gen_cortes_synthetic(&spec)?;
                Ok(ScenarioData {
                    train: data.train,
                    evaluation: data.validation,
                })
            }
            Scenario::UniformShift1d { m, n } => {
                let data = gen_uniform_shift_1d(*m, *n, seed)?;
                let grid: Vec<f64> = data.grid.iter().copied().filter(|x| (1.0..=3.0).contains(x)).collect();
                let x = Array2::from_shape_vec((grid.len(), 1), grid.clone()).expect("one column");
                Ok(ScenarioData {
                    train: data.train,
                    evaluation: LabeledSample::new(x, Array1::from(grid))?,
                })
            }
            Scenario::Csv {
                train,
                test,
                schema,
                scale,
            } => {
                if schema.domain.is_none() {
                    return Err(Error::invalid("the training CSV needs a domain column"));
                }
                let loaded = load_csv(train, schema)?;
                let is_target = loaded.is_target.expect("domain column requested");
                let set = TrainingSet::new(loaded.sample.x, loaded.sample.y, is_target)?;
                let evaluation = match test {
                    Some(path) => {
                        let schema = CsvSchema {
                            domain: None,
                            features: Some(loaded.feature_names.clone()),
                            ..schema.clone()
                        };
                        load_csv(path, &schema)?.sample
                    }
                    None => set.target(),
                };
                if !scale {
                    return Ok(ScenarioData { train: set, evaluation });
                }
                let source = set.source();
                let reference = if source.is_empty() { set.as_sample() } else { source };
                let scaler = ScalerState::fit(&reference, false)?;
                let x = scaler.transform_inputs(set.x.view())?;
                Ok(ScenarioData {
                    train: TrainingSet::new(x, set.y, set.is_target)?,
                    evaluation: scaler.apply(&evaluation)?,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Wann {
        /// `C_q`; `None` uses the task clip.
        clip_q: Option<f64>,
        pretrain_epochs: usize,
        stratified: bool,
    },
    Uniform,
    TargetOnly,
    Kmm(KmmConfig),
    Kliep(KliepConfig),
    Tradaboost { n_iterations: usize },
}

impl Method {
    pub const NAMES: [&'static str; 6] = ["wann", "uniform", "target-only", "kmm", "kliep", "tradaboost"];

    pub fn wann() -> Self {
        Method::Wann {
            clip_q: None,
            pretrain_epochs: WannConfig::default().pretrain_epochs,
            stratified: false,
        }
    }

    /// Default-configured method by name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "wann" => Self::wann(),
            "uniform" => Method::Uniform,
            "target-only" => Method::TargetOnly,
            "kmm" => Method::Kmm(KmmConfig::default()),
            "kliep" => Method::Kliep(KliepConfig::default()),
            "tradaboost" => Method::Tradaboost { n_iterations: 10 },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Wann { .. } => "wann",
            Method::Uniform => "uniform",
            Method::TargetOnly => "target-only",
            Method::Kmm(_) => "kmm",
            Method::Kliep(_) => "kliep",
            Method::Tradaboost { .. } => "tradaboost",
        }
    }

    /// Methods whose output includes a per-epoch validation curve.
    pub fn has_curve(&self) -> bool {
        !matches!(self, Method::Tradaboost { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    /// Used in file names; must be unique within an experiment.
    pub name: String,
    pub method: Method,
}

impl From<Method> for MethodSpec {
    fn from(method: Method) -> Self {
        Self {
            name: method.name().to_owned(),
            method,
        }
    }
}

/// Task network and optimizer settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSettings {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    /// `C_h`.
    pub clip: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            hidden: vec![100, 100],
            dropout: Vec::new(),
            clip: Some(1.0),
            epochs: 300,
            batch_size: 128,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainingSettings {
    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture::new(input_dim, &self.hidden)
            .with_dropout(&self.dropout)
            .with_clip(self.clip)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub methods: Vec<MethodSpec>,
    pub n_repeats: usize,
    pub base_seed: u64,
    pub training: TrainingSettings,
    /// Results are written here when set.
    pub output_dir: Option<PathBuf>,
    /// Worker threads for repeats; 1 runs them in order on the caller's thread.
    pub parallel: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, methods: Vec<MethodSpec>) -> Self {
        Self {
            scenario,
            methods,
            n_repeats: 1,
            base_seed: 0,
            training: TrainingSettings::default(),
            output_dir: None,
            parallel: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::invalid("at least one repeat is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        for (k, a) in self.methods.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(['/', '\\', '\n']) {
                return Err(Error::invalid(format!("unusable method name {:?}", a.name)));
            }
            if self.methods[..k].iter().any(|b| b.name == a.name) {
                return Err(Error::invalid(format!("method name `{}` is used twice", a.name)));
            }
        }
        if self.training.epochs == 0 || self.training.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if self.parallel == 0 {
            return Err(Error::invalid("parallel must be at least 1"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_repeats as u64).map(move |r| self.base_seed.wrapping_add(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub status: RunStatus,
    /// Evaluation MSE after each epoch; empty for methods without epochs.
    pub curve: Vec<f64>,
    /// Final evaluation MSE and MAE; NaN when the run failed.
    pub mse: f64,
    pub mae: f64,
    /// Training weight per row, rescaled to mean one.
    pub weights: Option<Vec<f64>>,
    /// Target flag per row, aligned with `weights`.
    pub weight_groups: Option<Vec<bool>>,
    /// Not persisted, so that run files stay reproducible.
    pub wall_seconds: Option<f64>,
}

impl RunResult {
    pub fn failed(method: &str, seed: u64, message: String) -> Self {
        Self {
            method: method.to_owned(),
            seed,
            status: RunStatus::Failed(message),
            curve: Vec::new(),
            mse: f64::NAN,
            mae: f64::NAN,
            weights: None,
            weight_groups: None,
            wall_seconds: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Sorted by method name, then seed.
    pub results: Vec<RunResult>,
    pub table: ComparisonTable,
}

struct Fitted {
    predictions: Array1<f64>,
    curve: Vec<f64>,
    weights: Array1<f64>,
}

fn mean_one(w: &Array1<f64>) -> Array1<f64> {
    let mean = w.mean().unwrap_or(0.0);
    if mean > 0.0 {
        w / mean
    } else {
        w.clone()
    }
}

fn baseline(fit: BaselineFit, weights: Array1<f64>, data: &ScenarioData) -> Result<Fitted> {
    Ok(Fitted {
        predictions: fit.net.forward(data.evaluation.x.view(), Mode::Eval)?,
        curve: fit.validation_mse,
        weights,
    })
}

fn fit_method(method: &Method, data: &ScenarioData, settings: &TrainingSettings, seed: u64) -> Result<Fitted> {
    let train = &data.train;
    let arch = settings.architecture(train.dim());
    let fit = FitConfig {
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        adam: settings.adam,
        seed,
    };
    let eval = Some(&data.evaluation);
    let total = train.len();
    match method {
        Method::Wann {
            clip_q,
            pretrain_epochs,
            stratified,
        } => {
            let c_h = settings
                .clip
                .ok_or_else(|| Error::invalid("WANN needs a task clip constant"))?;
            let clips = Clips {
                task: c_h,
                weighter: clip_q.unwrap_or(c_h),
            };
            let config = WannConfig {
                epochs: settings.epochs,
                batch_size: settings.batch_size.min(total),
                pretrain_epochs: *pretrain_epochs,
                adam: settings.adam,
                seed,
                stratified: *stratified,
            };
            let (model, history) = train_wann(&arch, clips, train, &config, eval)?;
            Ok(Fitted {
                predictions: model.predict(data.evaluation.x.view())?,
                curve: history.validation_mse,
                weights: model.training_weights(train.x.view())?.normalized,
            })
        }
        Method::Uniform => baseline(uniform_fit(train, &arch, &fit, eval)?, Array1::ones(total), data),
        Method::TargetOnly => {
            let w = Array1::from_iter(train.is_target.iter().map(|&t| if t { 1.0 } else { 0.0 }));
            baseline(target_only_fit(train, &arch, &fit, eval)?, mean_one(&w), data)
        }
        Method::Kmm(config) => {
            train.require_both_domains()?;
            let source = train.source();
            let target = train.target();
            let w = kmm_weights(source.x.view(), target.x.view(), config)?;
            let (f, weights) = fit_with_source_weights(train, &w, &arch, &fit, eval)?;
            baseline(f, mean_one(&weights), data)
        }
        Method::Kliep(config) => {
            train.require_both_domains()?;
            let source = train.source();
            let target = train.target();
            let config = KliepConfig { seed, ..*config };
            let w = kliep_weights(source.x.view(), target.x.view(), &config)?;
            let (f, weights) = fit_with_source_weights(train, &w, &arch, &fit, eval)?;
            baseline(f, mean_one(&weights), data)
        }
        Method::Tradaboost { n_iterations } => {
            let config = TradaboostConfig {
                n_iterations: *n_iterations,
                arch,
                fit,
            };
            let model = tradaboost_r2_fit(train, &config)?;
            Ok(Fitted {
                predictions: model.predict(data.evaluation.x.view())?,
                curve: Vec::new(),
                weights: mean_one(model.final_weights()),
            })
        }
    }
}

/// Trains one method on one repeat's data. Failures are captured in the result.
pub fn run_method(spec: &MethodSpec, data: &ScenarioData, settings: &TrainingSettings, seed: u64) -> RunResult {
    let start = Instant::now();
    let outcome = fit_method(&spec.method, data, settings, seed).and_then(|f| {
        let m = compute_metrics(f.predictions.view(), data.evaluation.y.view())?;
        if !(m.mse.is_finite() && m.mae.is_finite()) {
            return Err(Error::Diverged {
                epoch: settings.epochs,
                what: "final predictions",
            });
        }
        Ok((f, m))
    });
    match outcome {
        Ok((f, m)) => RunResult {
            method: spec.name.clone(),
            seed,
            status: RunStatus::Ok,
            curve: f.curve,
            mse: m.mse,
            mae: m.mae,
            weights: Some(f.weights.to_vec()),
            weight_groups: Some(data.train.is_target.clone()),
            wall_seconds: Some(start.elapsed().as_secs_f64()),
        },
        Err(e) => RunResult {
            wall_seconds: Some(start.elapsed().as_secs_f64()),
            ..RunResult::failed(&spec.name, seed, e.to_string())
        },
    }
}

fn run_repeat(config: &ExperimentConfig, seed: u64) -> Vec<RunResult> {
    match config.scenario.generate(seed) {
        Ok(data) => config
            .methods
            .iter()
            .map(|spec| run_method(spec, &data, &config.training, seed))
            .collect(),
        Err(e) => config
            .methods
            .iter()
            .map(|spec| RunResult::failed(&spec.name, seed, format!("data generation failed: {e}")))
            .collect(),
    }
}

pub(crate) fn sort_results(results: &mut [RunResult]) {
    results.sort_by(|a, b| a.method.cmp(&b.method).then(a.seed.cmp(&b.seed)));
}

/// Runs every method on every repeat. Repeat `r` generates its data once with
/// seed `base_seed + r` and hands the same rows to each method, which also
/// receives that seed. Outputs are written when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let seeds: Vec<u64> = config.seeds().collect();
    let nested: Vec<Vec<RunResult>> = if config.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallel)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| run_repeat(config, s)).collect())
    } else {
        seeds.iter().map(|&s| run_repeat(config, s)).collect()
    };
    let mut results: Vec<RunResult> = nested.into_iter().flatten().collect();
    sort_results(&mut results);
    let table = ComparisonTable::from_results(&results);
    if let Some(dir) = &config.output_dir {
        super::export::export_results(&results, dir)?;
        super::export::emit_plot_data(&results, dir)?;
    }
    Ok(ExperimentOutcome { results, table })
}

/// Mean normalized weight of target-flagged rows divided by that of the other rows.
pub fn weight_ratio(result: &RunResult) -> Option<f64> {
    let (w, g) = (result.weights.as_ref()?, result.weight_groups.as_ref()?);
    let mean = |flag: bool| {
        let v: Vec<f64> = w.iter().zip(g).filter(|(_, t)| **t == flag).map(|(w, _)| *w).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Some(mean(true)? / mean(false)?)
}

/// Per-epoch mean and sample standard deviation over the curves of one method.
pub fn curve_band(results: &[RunResult], method: &str) -> Vec<(f64, f64)> {
    let curves: Vec<&Vec<f64>> = results
        .iter()
        .filter(|r| r.method == method && r.is_ok() && !r.curve.is_empty())
        .map(|r| &r.curve)
        .collect();
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..len)
        .map(|e| {
            let vals: Vec<f64> = curves.iter().map(|c| c[e]).collect();
            super::metrics::mean_std(&vals)
        })
        .collect()
}
