use ndarray::{concatenate, Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::derive_seed;
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Architecture, Mlp, Mode};

/// Source inputs and labels with one nonnegative weight per row.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub w: ArrayView1<'a, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyBudget {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for DiscrepancyBudget {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyEstimate {
    /// `max(plus, minus)`.
    pub value: f64,
    /// Best `|d|` seen while ascending `d`.
    pub plus: f64,
    /// Best `|d|` seen while ascending `-d`.
    pub minus: f64,
}

struct Problem<'s, 't> {
    source: WeightedSample<'s>,
    target: &'t LabeledSample,
}

impl Problem<'_, '_> {
    /// `d(h') = mean_target (h' − y)² − Σ wᵢ (h'(xᵢ) − yᵢ)²` on the full samples.
    fn gap(&self, net: &Mlp) -> Result<f64> {
        let n = self.target.len() as f64;
        let tgt = net.weighted_mse(
            self.target.x.view(),
            self.target.y.view(),
            Array1::from_elem(self.target.len(), 1.0 / n).view(),
        )?;
        let src = net.weighted_mse(self.source.x, self.source.y, self.source.w)?;
        Ok(tgt - src)
    }
}

fn cycle_batch(order: &[usize], cursor: &mut usize, size: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(size);
    for _ in 0..size {
        out.push(order[*cursor % order.len()]);
        *cursor += 1;
    }
    out
}

/// Ascends `sign · d(h')` from `start`; returns the best `|d|` among the
/// starting point and the end of every epoch.
fn ascend(problem: &Problem<'_, '_>, start: Mlp, sign: f64, budget: &DiscrepancyBudget, seed: u64) -> Result<f64> {
    let mut net = start;
    let mut best = problem.gap(&net)?.abs();
    let m = problem.source.x.nrows();
    let n = problem.target.len();
    let bs = budget.batch_size.max(1);
    let src_b = bs.min(m);
    let tgt_b = bs.min(n);
    let steps = m.max(n).div_ceil(bs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamState::new(&net, budget.adam);
    let mut src_order: Vec<usize> = (0..m).collect();
    let mut tgt_order: Vec<usize> = (0..n).collect();
    for epoch in 0..budget.epochs {
        src_order.shuffle(&mut rng);
        tgt_order.shuffle(&mut rng);
        let (mut sc, mut tc) = (0, 0);
        for _ in 0..steps {
            let si = cycle_batch(&src_order, &mut sc, src_b);
            let ti = cycle_batch(&tgt_order, &mut tc, tgt_b);
            let x = concatenate(
                Axis(0),
                &[
                    problem.source.x.select(Axis(0), &si).view(),
                    problem.target.x.select(Axis(0), &ti).view(),
                ],
            )
            .expect("same width");
            let y = concatenate(
                Axis(0),
                &[
                    problem.source.y.select(Axis(0), &si).view(),
                    problem.target.y.select(Axis(0), &ti).view(),
                ],
            )
            .expect("vectors");
            // batch estimate of d: target mean minus rescaled weighted source sum
            let scale = m as f64 / src_b as f64;
            let coef: Array1<f64> = si
                .iter()
                .map(|&i| -scale * problem.source.w[i])
                .chain(std::iter::repeat_n(1.0 / tgt_b as f64, tgt_b))
                .collect();
            let (loss, mut grads) = net.weighted_mse_grad(
                x.view(),
                y.view(),
                coef.view(),
                Mode::Train { mask_seed: rng.random() },
            )?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, what: "discrepancy" });
            }
            grads.scale(-sign);
            opt.step(&mut net, &grads)?;
        }
        let gap = problem.gap(&net)?;
        if !gap.is_finite() {
            return Err(Error::Diverged { epoch, what: "discrepancy" });
        }
        best = best.max(gap.abs());
    }
    Ok(best)
}

/// Lower estimate of the Y-discrepancy between a weighted source sample and a
/// target sample over the class of networks `hclass`.
///
/// A fresh network (and each of `extra_starts`) is trained once to maximize
/// `d` and once to maximize `−d`; the largest `|d|` observed is returned. The
/// estimate never decreases as `budget.epochs` grows.
pub fn estimate_y_discrepancy(
    source: WeightedSample<'_>,
    target: &LabeledSample,
    hclass: &Architecture,
    budget: &DiscrepancyBudget,
    extra_starts: &[Mlp],
) -> Result<DiscrepancyEstimate> {
    let m = source.x.nrows();
    if m == 0 || target.is_empty() {
        return Err(Error::EmptySample);
    }
    if source.y.len() != m || source.w.len() != m {
        return Err(Error::invalid("source inputs, labels and weights differ in length"));
    }
    if source.w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("source weights must be finite and nonnegative"));
    }
    if source.x.ncols() != hclass.input_dim || target.dim() != hclass.input_dim {
        return Err(Error::invalid("sample width differs from the hypothesis class input"));
    }
    let problem = Problem { source, target };
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(budget.seed, 11));
    let fresh_plus = hclass.build(&mut init_rng)?;
    let fresh_minus = hclass.build(&mut init_rng)?;

    let mut plus = ascend(&problem, fresh_plus, 1.0, budget, derive_seed(budget.seed, 12))?;
    let mut minus = ascend(&problem, fresh_minus, -1.0, budget, derive_seed(budget.seed, 13))?;
    for (k, start) in extra_starts.iter().enumerate() {
        let mut start = start.clone();
        start.set_clip(hclass.clip);
        start.clip_weights();
        let k = k as u64;
        plus = plus.max(ascend(&problem, start.clone(), 1.0, budget, derive_seed(budget.seed, 100 + 2 * k))?);
        minus = minus.max(ascend(&problem, start, -1.0, budget, derive_seed(budget.seed, 101 + 2 * k))?);
    }
    Ok(DiscrepancyEstimate {
        value: plus.max(minus),
        plus,
        minus,
    })
}
