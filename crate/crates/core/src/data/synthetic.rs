use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{LabeledSample, TrainingSet};
use crate::error::{Error, Result};

/// Mean absolute value of the coordinates: `(1/N) Σ |xᵢ|`.
pub fn labeling_fn(x: ArrayView1<f64>) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("labeling function needs a non-empty vector"));
    }
    Ok(x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64)
}

/// Gaussian-mixture source versus single-gaussian target in `N` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CortesSyntheticSpec {
    pub dim: usize,
    /// Total training rows, including the ones drawn from the target gaussian.
    pub m: usize,
    pub target_fraction: f64,
    pub n_validation: usize,
    pub seed: u64,
}

impl CortesSyntheticSpec {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            m: 1000,
            target_fraction: 0.2,
            n_validation: 1000,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.m == 0 {
            return Err(Error::invalid("dimension and sample size must be positive"));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "target fraction must lie in (0, 1), got {}",
                self.target_fraction
            )));
        }
        Ok(())
    }

    /// Rows drawn from the target gaussian: `round(target_fraction · m)`.
    pub fn n_flagged(&self) -> usize {
        (self.target_fraction * self.m as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CortesData {
    /// Rows drawn from the target gaussian are tagged as target rows.
    pub train: TrainingSet,
    pub validation: LabeledSample,
    /// Training rows that came from the target gaussian. Same as
    /// `train.is_target` by construction, kept separately for weight analysis.
    pub origin_flags: Vec<bool>,
    pub source_centers: Array2<f64>,
    pub target_center: Array1<f64>,
}

fn gaussian_rows<R: Rng + ?Sized>(rng: &mut R, center: ArrayView1<f64>, out: &mut ndarray::ArrayViewMut1<f64>) {
    for (o, c) in out.iter_mut().zip(center.iter()) {
        let z: f64 = rng.sample(StandardNormal);
        *o = c + z;
    }
}

fn label_rows(x: &Array2<f64>) -> Array1<f64> {
    x.rows()
        .into_iter()
        .map(|r| labeling_fn(r).expect("rows are non-empty"))
        .collect()
}

/// Draws the mixture-versus-gaussian regression problem.
///
/// The mixture has `dim` equally weighted unit-variance isotropic components
/// with centers uniform in `[-1, 1]^dim`; the target is one more such
/// gaussian. Exactly `round(target_fraction · m)` training rows, at random
/// positions, come from the target gaussian and are tagged as target rows.
pub fn gen_cortes_synthetic(spec: &CortesSyntheticSpec) -> Result<CortesData> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source_centers = Array2::from_shape_simple_fn((d, d), || rng.random_range(-1.0..=1.0));
    let target_center = Array1::from_shape_simple_fn(d, || rng.random_range(-1.0..=1.0));

    let mut origin_flags = vec![false; spec.m];
    for i in index::sample(&mut rng, spec.m, spec.n_flagged()) {
        origin_flags[i] = true;
    }

    let mut x = Array2::zeros((spec.m, d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        if origin_flags[i] {
            gaussian_rows(&mut rng, target_center.view(), &mut row);
        } else {
            let k = rng.random_range(0..d);
            gaussian_rows(&mut rng, source_centers.row(k), &mut row);
        }
    }
    let y = label_rows(&x);

    let mut vx = Array2::zeros((spec.n_validation, d));
    for mut row in vx.rows_mut() {
        gaussian_rows(&mut rng, target_center.view(), &mut row);
    }
    let vy = label_rows(&vx);

    Ok(CortesData {
        train: TrainingSet::new(x, y, origin_flags.clone())?,
        validation: LabeledSample::new(vx, vy)?,
        origin_flags,
        source_centers,
        target_center,
    })
}

/// One-dimensional identity task with shifted supports.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformShiftData {
    /// `m` source rows from U[0, 2] followed by `n` target rows from U[1, 3].
    pub train: TrainingSet,
    /// Evenly spaced points covering both supports, `[0, 3]`.
    pub grid: Array1<f64>,
}

pub const UNIFORM_SHIFT_GRID_POINTS: usize = 301;

/// Source `x ~ U[0, 2]`, target `x ~ U[1, 3]`, labels `y = x`.
pub fn gen_uniform_shift_1d(m: usize, n: usize, seed: u64) -> Result<UniformShiftData> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("both samples need at least one row"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..=2.0)).collect();
    xs.extend((0..n).map(|_| rng.random_range(1.0..=3.0)));
    let y = Array1::from(xs.clone());
    let x = Array2::from_shape_vec((m + n, 1), xs).expect("one column");
    let mut is_target = vec![false; m];
    is_target.resize(m + n, true);
    let grid = Array1::linspace(0.0, 3.0, UNIFORM_SHIFT_GRID_POINTS);
    Ok(UniformShiftData {
        train: TrainingSet::new(x, y, is_target)?,
        grid,
    })
}
