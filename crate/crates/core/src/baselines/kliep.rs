use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_kernel_inputs, gaussian_kernel_matrix, median_bandwidth, WeightVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KliepConfig {
    /// Upper limit on the number of kernel centers; capped by the target size.
    pub n_centers: usize,
    /// Gaussian kernel σ; `None` uses the median pairwise distance.
    pub kernel_bandwidth: Option<f64>,
    pub max_iter: usize,
    /// Stop when the step size falls below this.
    pub tol: f64,
    /// Initial ascent step size.
    pub step: f64,
    pub seed: u64,
}

impl Default for KliepConfig {
    fn default() -> Self {
        Self {
            n_centers: 100,
            kernel_bandwidth: None,
            max_iter: 5000,
            tol: 1e-10,
            step: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KliepSolution {
    pub weights: WeightVector,
    pub alpha: Array1<f64>,
    /// Indices of the target rows used as centers.
    pub centers: Vec<usize>,
    pub bandwidth: f64,
    /// `Σⱼ log(Σₗ αₗ k(x'ⱼ, cₗ))` after every accepted iteration, starting
    /// with the initial point.
    pub objective_history: Vec<f64>,
}

fn log_likelihood(target_kernel: &Array2<f64>, alpha: &Array1<f64>) -> f64 {
    target_kernel.dot(alpha).iter().map(|v| v.ln()).sum()
}

/// Rescales `alpha` so that the mean source weight `bᵀα` equals one.
fn normalize(alpha: &mut Array1<f64>, b: &Array1<f64>) -> bool {
    let mass = b.dot(alpha);
    if mass > 0.0 && mass.is_finite() {
        *alpha /= mass;
        true
    } else {
        false
    }
}

/// Direct density-ratio estimation with Gaussian basis functions on target centers.
///
/// Maximizes the target log-likelihood of the modeled ratio subject to
/// `α ≥ 0` and a unit mean over the source sample, by projected gradient
/// ascent with step-size backtracking. A step is accepted only if it raises
/// the objective.
pub fn kliep_solve(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, config: &KliepConfig) -> Result<KliepSolution> {
    check_kernel_inputs(source_x, target_x)?;
    let n = target_x.nrows();
    if config.n_centers == 0 {
        return Err(Error::invalid("KLIEP needs at least one center"));
    }
    let n_centers = config.n_centers.min(n);
    let bandwidth = config
        .kernel_bandwidth
        .unwrap_or_else(|| median_bandwidth(source_x, target_x));
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid("kernel bandwidth must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = index::sample(&mut rng, n, n_centers).into_vec();
    centers.sort_unstable();
    let center_x = target_x.select(Axis(0), &centers);

    let target_kernel = gaussian_kernel_matrix(target_x, center_x.view(), bandwidth);
    let source_kernel = gaussian_kernel_matrix(source_x, center_x.view(), bandwidth);
    let b = source_kernel.mean_axis(Axis(0)).expect("non-empty source");

    if let Some(j) = target_kernel.rows().into_iter().position(|r| r.iter().all(|v| *v == 0.0)) {
        return Err(Error::Infeasible(format!(
            "target row {j} has zero kernel mass under every center; increase the bandwidth"
        )));
    }
    let mut alpha = Array1::ones(n_centers);
    if !normalize(&mut alpha, &b) {
        return Err(Error::Infeasible(
            "source sample has zero kernel mass under every center; increase the bandwidth".into(),
        ));
    }

    let mut value = log_likelihood(&target_kernel, &alpha);
    if !value.is_finite() {
        return Err(Error::Infeasible("log-likelihood is not finite at the start; increase the bandwidth".into()));
    }
    let mut history = vec![value];
    let b_norm2 = b.dot(&b);
    let mut step = config.step;
    for _ in 0..config.max_iter {
        if step < config.tol {
            break;
        }
        let fitted = target_kernel.dot(&alpha);
        let grad = target_kernel.t().dot(&fitted.mapv(|v| 1.0 / v));
        // ascent step, back onto bᵀα = 1 along b, then onto α ≥ 0
        let mut candidate = &alpha + &(grad * step);
        let gap = 1.0 - b.dot(&candidate);
        candidate.scaled_add(gap / b_norm2, &b);
        candidate.mapv_inplace(|v| v.max(0.0));
        let ok = normalize(&mut candidate, &b);
        let cand_value = if ok {
            log_likelihood(&target_kernel, &candidate)
        } else {
            f64::NEG_INFINITY
        };
        if cand_value > value {
            alpha = candidate;
            value = cand_value;
            history.push(value);
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    let weights = WeightVector::new(source_kernel.dot(&alpha))?;
    Ok(KliepSolution {
        weights,
        alpha,
        centers,
        bandwidth,
        objective_history: history,
    })
}

/// Source weights from [`kliep_solve`].
pub fn kliep_weights(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, config: &KliepConfig) -> Result<WeightVector> {
    Ok(kliep_solve(source_x, target_x, config)?.weights)
}
