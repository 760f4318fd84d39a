use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdamConfig, AdamState, Mlp, Mode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Splits a fresh permutation of `0..n` into consecutive chunks of `batch_size`.
pub(crate) fn shuffled_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Mini-batch Adam on the weighted squared error `Σ wᵢ (net(xᵢ) − yᵢ)²`.
///
/// Returns one loss value per epoch: the sum of the batch losses seen during
/// that epoch. Batches come from a seeded shuffle each epoch, so the result is
/// a deterministic function of the inputs and `config`.
pub fn fit_regression(
    net: &mut Mlp,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    config: &FitConfig,
) -> Result<Vec<f64>> {
    fit_regression_with(net, x, y, w, config, |_, _| Ok(()))
}

/// [`fit_regression`] with a hook called after every epoch.
pub fn fit_regression_with<F>(
    net: &mut Mlp,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    config: &FitConfig,
    mut on_epoch: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &Mlp) -> Result<()>,
{
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::invalid(format!(
            "{n} rows with {} labels and {} weights",
            y.len(),
            w.len()
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if x.ncols() != net.input_dim() {
        return Err(Error::invalid(format!(
            "input has {} columns, network expects {}",
            x.ncols(),
            net.input_dim()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(net, config.adam);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for idx in shuffled_batches(n, config.batch_size, &mut rng) {
            let xb = x.select(Axis(0), &idx);
            let yb = y.select(Axis(0), &idx);
            let wb = w.select(Axis(0), &idx);
            let mode = Mode::Train {
                mask_seed: rng.random(),
            };
            let (loss, grads) = net.weighted_mse_grad(xb.view(), yb.view(), wb.view(), mode)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, what: "loss" });
            }
            state.step(net, &grads)?;
            epoch_loss += loss;
        }
        trace.push(epoch_loss);
        on_epoch(epoch, net)?;
    }
    Ok(trace)
}
