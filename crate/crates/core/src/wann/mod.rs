//! Adversarial instance weighting.
//!
//! Three networks are trained together on the combined source and target
//! rows of a [`TrainingSet`]:
//!
//! - the task network `h`, minimizing the `q`-weighted risk;
//! - the adversary `h'`, from the same class as `h`, maximizing
//!   `L_P̂(h') − L_q(h')`, the gap between its mean target risk and its
//!   weighted risk;
//! - the weighting network `q ≥ 0`, minimizing `L_q(h) − L_q(h')`.
//!
//! Together these solve
//!
//! ```text
//! min_{h, q} max_{h'}  L_q(h) + L_P̂(h') − L_q(h')
//! ```
//!
//! with `L_q(g) = Σ q(xᵢ) (g(xᵢ) − yᵢ)²` over all rows and `L_P̂` the mean
//! squared error over target rows. On a mini-batch of `b` rows drawn from
//! `N` rows, the weighted sums are scaled by `N / b` so they estimate the
//! full-set sums; with a full batch they are the sums themselves.

mod discrepancy;

pub use discrepancy::{estimate_y_discrepancy, DiscrepancyBudget, DiscrepancyEstimate, WeightedSample};

use ndarray::{Array1, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::data::TrainingSet;
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::nn::{fit_regression, Activation, AdamConfig, AdamState, Architecture, FitConfig, GradBundle, Mlp, Mode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WannConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Spread target rows over batches so that each batch holds at least one
    /// whenever there are at least as many target rows as batches.
    pub stratified: bool,
}

impl Default for WannConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 128,
            pretrain_epochs: 50,
            adam: AdamConfig::default(),
            seed: 0,
            stratified: false,
        }
    }
}

/// Clipping constants for the hypothesis class (`h`, `h'`) and the weighter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clips {
    pub task: f64,
    pub weighter: f64,
}

impl Clips {
    /// Same constant for both classes.
    pub fn uniform(c: f64) -> Self {
        Self { task: c, weighter: c }
    }
}

/// Losses measured on one batch before the updates were applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Weighted risk of the task network.
    pub l_q_h: f64,
    /// Mean target risk of the adversary; zero when the batch has no target rows.
    pub l_tgt_hp: f64,
    /// Weighted risk of the adversary.
    pub l_q_hp: f64,
    pub n_target: usize,
}

impl StepDiagnostics {
    pub fn objective(&self) -> f64 {
        self.l_q_h + self.l_tgt_hp - self.l_q_hp
    }
}

/// Per-epoch record of a [`fit_wann`] run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    /// Mean squared error of `h` on the validation sample after each epoch.
    pub validation_mse: Vec<f64>,
    /// Mean batch objective over each epoch.
    pub objective: Vec<f64>,
}

/// Output of [`WannModel::step_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepGradients {
    pub diagnostics: StepDiagnostics,
    pub task: GradBundle,
    pub adversary: GradBundle,
    pub weighter: GradBundle,
}

/// `q(xᵢ)` for every training row, raw and rescaled to mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWeights {
    pub raw: Array1<f64>,
    pub normalized: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WannModel {
    pub task: Mlp,
    pub adversary: Mlp,
    pub weighter: Mlp,
    task_opt: AdamState,
    adversary_opt: AdamState,
    weighter_opt: AdamState,
}

/// SplitMix64 finalizer, used to derive independent seeds from one base seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_PRETRAIN: u64 = 2;
const STREAM_TRAIN: u64 = 3;

impl WannModel {
    /// Draws `h` and `h'` from `arch` with clip `clips.task`, and `q` with the
    /// same hidden layers, a relu output and clip `clips.weighter`.
    ///
    /// Only the task network keeps the architecture's dropout.
    pub fn new(arch: &Architecture, clips: Clips, config: &WannConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
        let task = arch.clone().with_clip(Some(clips.task)).build(&mut rng)?;
        let adversary = arch
            .clone()
            .with_dropout(&[])
            .with_clip(Some(clips.task))
            .build(&mut rng)?;
        let weighter = arch
            .clone()
            .with_dropout(&[])
            .with_output(Activation::Relu)
            .with_clip(Some(clips.weighter))
            .build(&mut rng)?;
        Self::from_networks(task, adversary, weighter, config.adam)
    }

    /// Wraps explicit networks. The weighter must have a relu output and the
    /// task and adversary must share their layer shapes.
    pub fn from_networks(task: Mlp, adversary: Mlp, weighter: Mlp, adam: AdamConfig) -> Result<Self> {
        if weighter.output_activation() != Activation::Relu {
            return Err(Error::invalid("the weighting network needs a relu output"));
        }
        let shape = |n: &Mlp| -> Vec<(usize, usize)> {
            n.layers().iter().map(|l| l.weights.dim()).collect()
        };
        if shape(&task) != shape(&adversary) {
            return Err(Error::invalid("task and adversary must share an architecture"));
        }
        if task.input_dim() != weighter.input_dim() {
            return Err(Error::invalid("weighter input width differs from the task's"));
        }
        Ok(Self {
            task_opt: AdamState::new(&task, adam),
            adversary_opt: AdamState::new(&adversary, adam),
            weighter_opt: AdamState::new(&weighter, adam),
            task,
            adversary,
            weighter,
        })
    }

    /// Fits `q` to the constant `1/(m+n)` on every training row.
    ///
    /// The weighter's fixed output scale is set to `1/(m+n)` and the network
    /// underneath is fitted to 1, so its parameters live on the same scale as
    /// the task network's and an optimizer step moves `q` by a small relative
    /// amount. The fit is done on the pre-activation output (the relu is
    /// bypassed), since a relu output would otherwise stall on rows where it
    /// starts below zero.
    pub fn pretrain_weighter(&mut self, train: &TrainingSet, config: &WannConfig) -> Result<()> {
        if config.pretrain_epochs == 0 {
            return Ok(());
        }
        let n = train.len();
        let target = Array1::ones(n);
        let weights = Array1::from_elem(n, 1.0 / n as f64);
        let fit = FitConfig {
            epochs: config.pretrain_epochs,
            batch_size: config.batch_size.clamp(1, n),
            adam: config.adam,
            seed: derive_seed(config.seed, STREAM_PRETRAIN),
        };
        let mut net = self.weighter.clone();
        net.set_output_activation(Activation::Identity);
        net.set_output_scale(1.0)?;
        fit_regression(&mut net, train.x.view(), target.view(), weights.view(), &fit)?;
        net.set_output_activation(Activation::Relu);
        net.set_output_scale(1.0 / n as f64)?;
        self.weighter_opt = AdamState::new(&net, self.weighter_opt.config);
        self.weighter = net;
        Ok(())
    }

    /// One simultaneous descent-ascent step on a batch.
    ///
    /// All three gradients are taken at the current parameters; the updates
    /// are then applied to `h'`, `h` and `q` in that order, each followed by
    /// clipping. `population` is the size of the set the batch was drawn from.
    pub fn step(
        &mut self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        is_target: &[bool],
        population: usize,
        mask_seed: u64,
        epoch: usize,
    ) -> Result<StepDiagnostics> {
        let g = self.step_gradients(x, y, is_target, population, mask_seed, epoch)?;
        self.adversary_opt.step(&mut self.adversary, &g.adversary)?;
        self.task_opt.step(&mut self.task, &g.task)?;
        self.weighter_opt.step(&mut self.weighter, &g.weighter)?;
        Ok(g.diagnostics)
    }

    /// The batch losses and the gradient each network descends in [`WannModel::step`],
    /// without changing the model.
    ///
    /// With `s = population / batch` and `qᵢ = s·q(xᵢ)`, the task descends
    /// `Σ qᵢ (h(xᵢ) − yᵢ)²`, the adversary descends
    /// `Σ qᵢ (h'(xᵢ) − yᵢ)² − mean_target (h'(xᵢ) − yᵢ)²` and the weighter
    /// descends `Σ qᵢ ((h(xᵢ) − yᵢ)² − (h'(xᵢ) − yᵢ)²)`.
    pub fn step_gradients(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        is_target: &[bool],
        population: usize,
        mask_seed: u64,
        epoch: usize,
    ) -> Result<StepGradients> {
        let b = x.nrows();
        if b == 0 || y.len() != b || is_target.len() != b {
            return Err(Error::invalid(format!(
                "batch of {b} rows with {} labels and {} tags",
                y.len(),
                is_target.len()
            )));
        }
        if population < b {
            return Err(Error::invalid("batch larger than its population"));
        }
        self.task.check_input(&x)?;
        let scale = population as f64 / b as f64;
        let n_target = is_target.iter().filter(|t| **t).count();
        let inv_target = if n_target > 0 { 1.0 / n_target as f64 } else { 0.0 };

        let q_tape = self
            .weighter
            .forward_tape(x, Mode::Train { mask_seed: derive_seed(mask_seed, 1) });
        let h_tape = self
            .task
            .forward_tape(x, Mode::Train { mask_seed: derive_seed(mask_seed, 2) });
        let hp_tape = self
            .adversary
            .forward_tape(x, Mode::Train { mask_seed: derive_seed(mask_seed, 3) });

        let mut diag = StepDiagnostics {
            l_q_h: 0.0,
            l_tgt_hp: 0.0,
            l_q_hp: 0.0,
            n_target,
        };
        let mut d_task = Array1::zeros(b);
        let mut d_adv = Array1::zeros(b);
        let mut d_weight = Array1::zeros(b);
        for i in 0..b {
            let q = scale * q_tape.output[i];
            let r_h = h_tape.output[i] - y[i];
            let r_hp = hp_tape.output[i] - y[i];
            let (e_h, e_hp) = (r_h * r_h, r_hp * r_hp);
            let tgt = if is_target[i] { inv_target } else { 0.0 };
            diag.l_q_h += q * e_h;
            diag.l_q_hp += q * e_hp;
            diag.l_tgt_hp += tgt * e_hp;
            // ∂/∂h(xᵢ) of L_q(h): descent
            d_task[i] = 2.0 * q * r_h;
            // ∂/∂h'(xᵢ) of -(L_tgt(h') - L_q(h')): descent on the negated ascent objective
            d_adv[i] = -2.0 * (tgt - q) * r_hp;
            // ∂/∂q(xᵢ) of L_q(h) - L_q(h')
            d_weight[i] = scale * (e_h - e_hp);
        }
        if ![diag.l_q_h, diag.l_tgt_hp, diag.l_q_hp].iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { epoch, what: "loss" });
        }

        let g_adv = self.adversary.backward(&hp_tape, d_adv.view());
        let g_task = self.task.backward(&h_tape, d_task.view());
        let g_weight = self.weighter.backward(&q_tape, d_weight.view());
        for g in [&g_adv, &g_task, &g_weight] {
            if !all_finite(g) {
                return Err(Error::Diverged { epoch, what: "gradient" });
            }
        }
        Ok(StepGradients {
            diagnostics: diag,
            task: g_task,
            adversary: g_adv,
            weighter: g_weight,
        })
    }

    /// `q(xᵢ)` for each training row, plus a copy rescaled to mean one.
    pub fn training_weights(&self, x: ArrayView2<f64>) -> Result<TrainingWeights> {
        let raw = self.weighter.forward(x, Mode::Eval)?;
        let mean = raw.mean().unwrap_or(0.0);
        if !(mean > 0.0) {
            return Err(Error::NormalizationUndefined);
        }
        let normalized = raw.mapv(|v| v / mean);
        Ok(TrainingWeights { raw, normalized })
    }

    /// Task-network predictions in evaluation mode.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.task.forward(x, Mode::Eval)
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.task_opt.step_count()
    }
}

fn all_finite(g: &GradBundle) -> bool {
    g.layers
        .iter()
        .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
}

fn mse(pred: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    Zip::from(pred)
        .and(y)
        .fold(0.0, |acc, p, t| acc + (p - t) * (p - t))
        / y.len() as f64
}

/// Batches for one epoch. Stratified batching deals target and source rows
/// round-robin over the batches, then shuffles within each batch.
fn epoch_batches<R: Rng + ?Sized>(train: &TrainingSet, batch_size: usize, stratified: bool, rng: &mut R) -> Vec<Vec<usize>> {
    let n = train.len();
    if !stratified {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        return order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    }
    let n_batches = n.div_ceil(batch_size);
    let mut targets = train.target_indices();
    let mut sources = train.source_indices();
    targets.shuffle(rng);
    sources.shuffle(rng);
    let mut batches = vec![Vec::with_capacity(batch_size + 1); n_batches];
    for (k, i) in targets.into_iter().chain(sources).enumerate() {
        batches[k % n_batches].push(i);
    }
    for b in &mut batches {
        b.shuffle(rng);
    }
    batches
}

/// Runs `config.epochs` passes of [`WannModel::step`] over seeded shuffles of
/// the training rows. The weighter should already be pretrained.
pub fn fit_wann(
    model: &mut WannModel,
    train: &TrainingSet,
    config: &WannConfig,
    validation: Option<&LabeledSample>,
) -> Result<TrainingHistory> {
    train.require_both_domains()?;
    if config.batch_size == 0 || config.batch_size > train.len() {
        return Err(Error::invalid(format!(
            "batch size must lie in [1, {}], got {}",
            train.len(),
            config.batch_size
        )));
    }
    if let Some(v) = validation {
        if v.dim() != train.dim() {
            return Err(Error::invalid("validation sample width differs from training"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_TRAIN));
    let mut history = TrainingHistory::default();
    for epoch in 0..config.epochs {
        let batches = epoch_batches(train, config.batch_size, config.stratified, &mut rng);
        let mut objective = 0.0;
        for idx in &batches {
            let xb = train.x.select(Axis(0), idx);
            let yb = train.y.select(Axis(0), idx);
            let tb: Vec<bool> = idx.iter().map(|&i| train.is_target[i]).collect();
            let diag = model.step(xb.view(), yb.view(), &tb, train.len(), rng.random(), epoch)?;
            objective += diag.objective();
        }
        history.objective.push(objective / batches.len() as f64);
        if let Some(v) = validation {
            let pred = model.predict(v.x.view())?;
            let err = mse(pred.view(), v.y.view());
            if !err.is_finite() {
                return Err(Error::Diverged { epoch, what: "validation error" });
            }
            history.validation_mse.push(err);
        }
    }
    Ok(history)
}

/// Builds a model, pretrains its weighter and runs [`fit_wann`].
pub fn train_wann(
    arch: &Architecture,
    clips: Clips,
    train: &TrainingSet,
    config: &WannConfig,
    validation: Option<&LabeledSample>,
) -> Result<(WannModel, TrainingHistory)> {
    let mut model = WannModel::new(arch, clips, config)?;
    model.pretrain_weighter(train, config)?;
    let history = fit_wann(&mut model, train, config, validation)?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_uniform_shift_1d, TrainingSet};
    use crate::nn::DenseLayer;
    use ndarray::array;

    fn linear(w: f64, b: f64, act: Activation) -> Mlp {
        Mlp::from_layers(
            vec![DenseLayer {
                weights: array![[w]],
                biases: array![b],
                activation: act,
                dropout_rate: 0.0,
            }],
            Some(10.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_weighter_only_moves_adversary() {
        let task = linear(0.5, 0.1, Activation::Identity);
        let adv = linear(-0.3, 0.2, Activation::Identity);
        let q = linear(0.0, 0.0, Activation::Relu);
        let mut model = WannModel::from_networks(task.clone(), adv.clone(), q.clone(), AdamConfig::default()).unwrap();
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![1.0, 0.0, 2.0];
        let d = model.step(x.view(), y.view(), &[false, false, true], 3, 0, 0).unwrap();
        assert_eq!(d.l_q_h, 0.0);
        assert_eq!(d.l_q_hp, 0.0);
        assert!(d.l_tgt_hp > 0.0);
        assert_eq!(model.task, task);
        assert_eq!(model.weighter, q);
        assert_ne!(model.adversary, adv);
    }

    #[test]
    fn identical_task_and_adversary_freeze_weighter() {
        let task = linear(0.5, 0.1, Activation::Identity);
        let q = linear(0.2, 0.3, Activation::Relu);
        let mut model = WannModel::from_networks(task.clone(), task.clone(), q.clone(), AdamConfig::default()).unwrap();
        let x = array![[1.0], [-2.0], [3.0]];
        let y = array![1.0, 0.0, 2.0];
        let d = model.step(x.view(), y.view(), &[false, true, true], 3, 0, 0).unwrap();
        assert_eq!(d.l_q_h, d.l_q_hp);
        assert_eq!(model.weighter, q);
    }

    #[test]
    fn rejects_non_relu_weighter() {
        let a = linear(0.0, 0.0, Activation::Identity);
        assert!(WannModel::from_networks(a.clone(), a.clone(), a, AdamConfig::default()).is_err());
    }

    #[test]
    fn zero_epochs_leaves_model() {
        let data = gen_uniform_shift_1d(30, 10, 0).unwrap();
        let config = WannConfig {
            epochs: 0,
            batch_size: 8,
            pretrain_epochs: 2,
            ..WannConfig::default()
        };
        let arch = Architecture::new(1, &[4]);
        let mut model = WannModel::new(&arch, Clips::uniform(1.0), &config).unwrap();
        model.pretrain_weighter(&data.train, &config).unwrap();
        let before = model.clone();
        let history = fit_wann(&mut model, &data.train, &config, None).unwrap();
        assert!(history.validation_mse.is_empty() && history.objective.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn pretrain_zero_epochs_is_noop() {
        let data = gen_uniform_shift_1d(30, 10, 0).unwrap();
        let config = WannConfig {
            pretrain_epochs: 0,
            ..WannConfig::default()
        };
        let mut model = WannModel::new(&Architecture::new(1, &[4]), Clips::uniform(1.0), &config).unwrap();
        let before = model.clone();
        model.pretrain_weighter(&data.train, &config).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn stratified_batches_cover_rows_once() {
        let data = gen_uniform_shift_1d(90, 10, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batches = epoch_batches(&data.train, 16, true, &mut rng);
        assert_eq!(batches.len(), 7);
        for b in &batches {
            assert!(b.iter().any(|&i| data.train.is_target[i]));
        }
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn all_zero_weights_cannot_normalize() {
        let q = linear(0.0, 0.0, Activation::Relu);
        let t = linear(0.0, 0.0, Activation::Identity);
        let model = WannModel::from_networks(t.clone(), t, q, AdamConfig::default()).unwrap();
        let r = model.training_weights(array![[1.0], [2.0]].view());
        assert!(matches!(r, Err(Error::NormalizationUndefined)));
    }

    #[test]
    fn fit_requires_both_domains() {
        let set = TrainingSet::new(array![[1.0], [2.0]], array![1.0, 2.0], vec![false, false]).unwrap();
        let config = WannConfig {
            batch_size: 2,
            ..WannConfig::default()
        };
        let mut model = WannModel::new(&Architecture::new(1, &[]), Clips::uniform(1.0), &config).unwrap();
        assert!(fit_wann(&mut model, &set, &config, None).is_err());
    }
}
