//! Boosting for regression transfer.
//!
//! Each round fits the base learner on the current instance distribution and
//! measures adjusted errors `eᵢ = |ŷᵢ − yᵢ| / maxⱼ |ŷⱼ − yⱼ|`. Source rows are
//! down-weighted by the fixed factor `βₛ^eᵢ` with
//! `βₛ = 1 / (1 + √(2 ln m / N))`; target rows follow AdaBoost.R2, up-weighted
//! by `βₜ^(−eᵢ)` with `βₜ = εₜ / (1 − εₜ)` and `εₜ` the weighted adjusted
//! error over target rows. Predictions are the weighted median, with
//! confidences `ln(1/βₜ)`, of the learners from the second half of the rounds.

use ndarray::{Array1, ArrayView2, Axis};

use super::fit_weighted;
use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::nn::{Architecture, FitConfig, Mlp, Mode};
use crate::wann::derive_seed;

/// Bounds on the target error so that `βₜ` stays in `(0, 1)`.
const MIN_TARGET_ERROR: f64 = 1e-10;
const MAX_TARGET_ERROR: f64 = 0.499;

#[derive(Debug, Clone, PartialEq)]
pub struct TradaboostConfig {
    pub n_iterations: usize,
    pub arch: Architecture,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradaboostModel {
    pub learners: Vec<Mlp>,
    /// `ln(1/βₜ)` per learner.
    pub confidences: Vec<f64>,
    /// Instance distribution after each round's update (sums to one).
    pub weight_history: Vec<Array1<f64>>,
    /// Distribution each learner was fitted on; the first is uniform.
    pub fit_weights: Vec<Array1<f64>>,
    /// The error of the last learner was zero and boosting stopped early.
    pub stopped_early: bool,
}

impl TradaboostModel {
    /// Distribution over training rows after the last round.
    pub fn final_weights(&self) -> &Array1<f64> {
        self.weight_history
            .last()
            .unwrap_or_else(|| self.fit_weights.last().expect("at least one round"))
    }

    /// Weighted median of the second-half learners' predictions.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let first = self.learners.len() / 2;
        let preds = self.learners[first..]
            .iter()
            .map(|l| l.forward(x, Mode::Eval))
            .collect::<Result<Vec<_>>>()?;
        let conf = &self.confidences[first..];
        Ok((0..x.nrows())
            .map(|i| {
                let values: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                weighted_median(&values, conf)
            })
            .collect())
    }
}

/// Smallest value whose cumulative weight reaches half the total.
pub(crate) fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= 0.5 * total {
            return values[i];
        }
    }
    values[order[order.len() - 1]]
}

pub fn tradaboost_r2_fit(train: &TrainingSet, config: &TradaboostConfig) -> Result<TradaboostModel> {
    train.require_both_domains()?;
    if config.n_iterations == 0 {
        return Err(Error::invalid("boosting needs at least one iteration"));
    }
    let total = train.len();
    let m = train.n_source() as f64;
    let beta_source = 1.0 / (1.0 + (2.0 * m.ln() / config.n_iterations as f64).sqrt());
    let rows: Vec<usize> = (0..total).collect();
    let mut weights = Array1::from_elem(total, 1.0 / total as f64);

    let mut model = TradaboostModel {
        learners: Vec::with_capacity(config.n_iterations),
        confidences: Vec::with_capacity(config.n_iterations),
        weight_history: Vec::with_capacity(config.n_iterations),
        fit_weights: Vec::with_capacity(config.n_iterations),
        stopped_early: false,
    };
    for round in 0..config.n_iterations {
        let fit = FitConfig {
            seed: if round == 0 {
                config.fit.seed
            } else {
                derive_seed(config.fit.seed, 1000 + round as u64)
            },
            ..config.fit
        };
        let learner = fit_weighted(train, &rows, &weights, &config.arch, &fit, None)?.net;
        let pred = learner.forward(train.x.view(), Mode::Eval)?;
        let abs_err = (&pred - &train.y).mapv(f64::abs);
        let max_err = abs_err.iter().copied().fold(0.0, f64::max);
        model.fit_weights.push(weights.clone());
        if !max_err.is_finite() {
            return Err(Error::Diverged { epoch: round, what: "boosting error" });
        }
        if max_err == 0.0 {
            model.learners.push(learner);
            model.confidences.push((1.0 / MIN_TARGET_ERROR).ln());
            model.stopped_early = true;
            break;
        }
        let adjusted = abs_err / max_err;

        let (mut tgt_err, mut tgt_mass) = (0.0, 0.0);
        for i in 0..total {
            if train.is_target[i] {
                tgt_err += weights[i] * adjusted[i];
                tgt_mass += weights[i];
            }
        }
        let eps = (tgt_err / tgt_mass).clamp(MIN_TARGET_ERROR, MAX_TARGET_ERROR);
        let beta_target = eps / (1.0 - eps);

        for i in 0..total {
            weights[i] *= if train.is_target[i] {
                beta_target.powf(-adjusted[i])
            } else {
                beta_source.powf(adjusted[i])
            };
        }
        let sum = weights.sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Numerical("boosting weights collapsed".into()));
        }
        weights /= sum;
        model.weight_history.push(weights.clone());
        model.learners.push(learner);
        model.confidences.push((1.0 / beta_target).ln());
    }
    Ok(model)
}

/// Source rows' share of the final distribution, one entry per source row.
pub fn source_weights(model: &TradaboostModel, train: &TrainingSet) -> Array1<f64> {
    model.final_weights().select(Axis(0), &train.source_indices())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_picks_half_mass() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[10.0, 1.0, 1.0]), 3.0);
        assert_eq!(weighted_median(&[5.0], &[0.3]), 5.0);
    }
}
