//! Instance-based competitors: uniform weighting, target only, kernel mean
//! matching, KLIEP and TrAdaBoost.R2.

mod kernel;
mod kliep;
mod kmm;
mod tradaboost;

pub use kernel::{gaussian_kernel_matrix, median_bandwidth};
pub use kliep::{kliep_solve, kliep_weights, KliepConfig, KliepSolution};
pub use kmm::{kmm_objective, kmm_solve, kmm_weights, KmmConfig, KmmSolution};
pub use tradaboost::{source_weights as tradaboost_source_weights, tradaboost_r2_fit, TradaboostConfig, TradaboostModel};

use ndarray::{Array1, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{LabeledSample, TrainingSet};
use crate::error::{Error, Result};
use crate::nn::{fit_regression_with, Architecture, FitConfig, Mlp, Mode};
use crate::wann::derive_seed;

/// Nonnegative, finite per-row training weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Array1<f64>);

impl WeightVector {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self(weights))
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy rescaled to sum to one.
    pub fn to_probabilities(&self) -> Result<Array1<f64>> {
        let total = self.0.sum();
        if !(total > 0.0) {
            return Err(Error::NormalizationUndefined);
        }
        Ok(&self.0 / total)
    }
}

/// A network trained by one of the plain weighted-regression baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFit {
    pub net: Mlp,
    pub loss_trace: Vec<f64>,
    /// Validation mean squared error after each epoch, when a validation sample was given.
    pub validation_mse: Vec<f64>,
}

pub(crate) fn mean_squared_error(net: &Mlp, sample: &LabeledSample) -> Result<f64> {
    let pred = net.forward(sample.x.view(), Mode::Eval)?;
    Ok(Zip::from(&pred)
        .and(&sample.y)
        .fold(0.0, |acc, p, t| acc + (p - t) * (p - t))
        / sample.len() as f64)
}

/// Builds a network from `arch` and fits it on the selected rows with the given weights.
///
/// The initial parameters come from the same seed stream as the WANN task
/// network, so for equal seeds every method starts from the same `h`.
pub fn fit_weighted(
    train: &TrainingSet,
    rows: &[usize],
    weights: &Array1<f64>,
    arch: &Architecture,
    config: &FitConfig,
    validation: Option<&LabeledSample>,
) -> Result<BaselineFit> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to fit"));
    }
    if weights.len() != rows.len() {
        return Err(Error::invalid("one weight per selected row is required"));
    }
    let subset = train.as_sample().select(rows);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let mut net = arch.build(&mut rng)?;
    let fit = FitConfig {
        seed: derive_seed(config.seed, 2),
        ..*config
    };
    let mut validation_mse = Vec::new();
    let loss_trace = fit_regression_with(&mut net, subset.x.view(), subset.y.view(), weights.view(), &fit, |epoch, net| {
        if let Some(v) = validation {
            let err = mean_squared_error(net, v)?;
            if !err.is_finite() {
                return Err(Error::Diverged { epoch, what: "validation error" });
            }
            validation_mse.push(err);
        }
        Ok(())
    })?;
    Ok(BaselineFit {
        net,
        loss_trace,
        validation_mse,
    })
}

/// Every one of the `m + n` rows weighted `1/(m+n)`.
pub fn uniform_fit(
    train: &TrainingSet,
    arch: &Architecture,
    config: &FitConfig,
    validation: Option<&LabeledSample>,
) -> Result<BaselineFit> {
    let rows: Vec<usize> = (0..train.len()).collect();
    let w = Array1::from_elem(rows.len(), 1.0 / rows.len() as f64);
    fit_weighted(train, &rows, &w, arch, config, validation)
}

/// Only the target rows, each weighted `1/n`.
pub fn target_only_fit(
    train: &TrainingSet,
    arch: &Architecture,
    config: &FitConfig,
    validation: Option<&LabeledSample>,
) -> Result<BaselineFit> {
    let rows = train.target_indices();
    if rows.is_empty() {
        return Err(Error::invalid("target-only training needs at least one target row"));
    }
    let w = Array1::from_elem(rows.len(), 1.0 / rows.len() as f64);
    fit_weighted(train, &rows, &w, arch, config, validation)
}

/// Fits on all rows with source weights from a reweighting method and unit
/// weights on target rows, rescaled to sum to one.
pub fn fit_with_source_weights(
    train: &TrainingSet,
    source_weights: &WeightVector,
    arch: &Architecture,
    config: &FitConfig,
    validation: Option<&LabeledSample>,
) -> Result<(BaselineFit, Array1<f64>)> {
    let sources = train.source_indices();
    if source_weights.len() != sources.len() {
        return Err(Error::invalid("one weight per source row is required"));
    }
    let mut w = Array1::ones(train.len());
    for (k, &i) in sources.iter().enumerate() {
        w[i] = source_weights.as_array()[k];
    }
    let w = WeightVector::new(w)?.to_probabilities()?;
    let rows: Vec<usize> = (0..train.len()).collect();
    let fit = fit_weighted(train, &rows, &w, arch, config, validation)?;
    Ok((fit, w))
}

pub(crate) fn check_kernel_inputs(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>) -> Result<()> {
    if source_x.nrows() == 0 || target_x.nrows() == 0 {
        return Err(Error::EmptySample);
    }
    if source_x.ncols() != target_x.ncols() {
        return Err(Error::invalid("source and target have different widths"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_uniform_shift_1d;

    fn config() -> FitConfig {
        FitConfig {
            epochs: 5,
            batch_size: 16,
            seed: 3,
            ..FitConfig::default()
        }
    }

    #[test]
    fn uniform_is_constant_weight_fit() {
        let data = gen_uniform_shift_1d(40, 10, 1).unwrap();
        let arch = Architecture::new(1, &[8]).with_clip(Some(1.0));
        let a = uniform_fit(&data.train, &arch, &config(), None).unwrap();
        let rows: Vec<usize> = (0..50).collect();
        let b = fit_weighted(&data.train, &rows, &Array1::from_elem(50, 0.02), &arch, &config(), None).unwrap();
        assert_eq!(a, b);
        let c = uniform_fit(&data.train, &arch, &config(), None).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn target_only_on_target_only_data_equals_uniform() {
        let data = gen_uniform_shift_1d(5, 30, 2).unwrap();
        let target = data.train.target();
        let set = TrainingSet::new(target.x.clone(), target.y.clone(), vec![true; target.len()]).unwrap();
        let arch = Architecture::new(1, &[8]);
        let a = target_only_fit(&set, &arch, &config(), None).unwrap();
        let b = uniform_fit(&set, &arch, &config(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn target_only_needs_targets() {
        let data = gen_uniform_shift_1d(5, 3, 2).unwrap();
        let source = data.train.source();
        let set = TrainingSet::new(source.x, source.y, vec![false; 5]).unwrap();
        assert!(target_only_fit(&set, &Architecture::new(1, &[]), &config(), None).is_err());
    }

    #[test]
    fn single_target_row_does_not_crash() {
        let data = gen_uniform_shift_1d(20, 1, 4).unwrap();
        let fit = target_only_fit(&data.train, &Architecture::new(1, &[8]), &config(), None).unwrap();
        let grid = data.grid.clone().insert_axis(ndarray::Axis(1));
        let pred = fit.net.forward(grid.view(), Mode::Eval).unwrap();
        assert!(pred.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn weight_vector_rejects_negative() {
        assert!(WeightVector::new(ndarray::array![1.0, -0.1]).is_err());
        assert!(WeightVector::new(ndarray::array![0.0, 0.0]).unwrap().to_probabilities().is_err());
    }
}
