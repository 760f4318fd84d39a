use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::LabeledSample;
use crate::error::{Error, Result};

/// Per-column standardization fitted on a reference sample.
///
/// Constant columns get a standard deviation of 1, so they map to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerState {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    /// Label mean and standard deviation, when labels are scaled too.
    pub label: Option<(f64, f64)>,
}

fn clamp_std(s: f64) -> f64 {
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

impl ScalerState {
    pub fn fit(reference: &LabeledSample, scale_labels: bool) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptySample);
        }
        let mean = reference.x.mean_axis(Axis(0)).expect("non-empty");
        let std = reference.x.std_axis(Axis(0), 0.0).mapv(clamp_std);
        let label = scale_labels.then(|| {
            let m = reference.y.mean().expect("non-empty");
            (m, clamp_std(reference.y.std(0.0)))
        });
        Ok(Self { mean, std, label })
    }

    pub fn transform_inputs(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((&x - &self.mean) / &self.std)
    }

    pub fn transform_labels(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match self.label {
            Some((m, s)) => y.mapv(|v| (v - m) / s),
            None => y.to_owned(),
        }
    }

    pub fn inverse_labels(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match self.label {
            Some((m, s)) => y.mapv(|v| v * s + m),
            None => y.to_owned(),
        }
    }

    pub fn apply(&self, sample: &LabeledSample) -> Result<LabeledSample> {
        Ok(LabeledSample {
            x: self.transform_inputs(sample.x.view())?,
            y: self.transform_labels(sample.y.view()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> LabeledSample {
        LabeledSample::new(
            array![[1.0, 5.0, 2.0], [3.0, 5.0, -7.0], [8.0, 5.0, 0.5], [-2.0, 5.0, 1.0]],
            array![10.0, 20.0, 15.0, -3.0],
        )
        .unwrap()
    }

    #[test]
    fn reference_is_standardized() {
        let s = sample();
        let state = ScalerState::fit(&s, false).unwrap();
        let scaled = state.apply(&s).unwrap();
        for c in [0, 2] {
            let col = scaled.x.column(c);
            assert!(col.mean().unwrap().abs() < 1e-10);
            assert!((col.std(0.0) - 1.0).abs() < 1e-10);
        }
        assert_eq!(scaled.y, s.y);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = sample();
        let scaled = ScalerState::fit(&s, false).unwrap().apply(&s).unwrap();
        assert!(scaled.x.column(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn label_round_trip() {
        let s = sample();
        let state = ScalerState::fit(&s, true).unwrap();
        let scaled = state.transform_labels(s.y.view());
        let back = state.inverse_labels(scaled.view());
        for (a, b) in back.iter().zip(s.y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
