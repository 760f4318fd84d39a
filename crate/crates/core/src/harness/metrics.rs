use ndarray::{ArrayView1, Zip};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

pub fn compute_metrics(predictions: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptySample);
    }
    let (se, ae) = Zip::from(predictions)
        .and(labels)
        .fold((0.0, 0.0), |(se, ae), p, y| {
            let r = p - y;
            (se + r * r, ae + r.abs())
        });
    let k = labels.len() as f64;
    Ok(Metrics { mse: se / k, mae: ae / k })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn by_formula() {
        let m = compute_metrics(array![0.0, 0.0].view(), array![1.0, -1.0].view()).unwrap();
        assert_eq!(m, Metrics { mse: 1.0, mae: 1.0 });
        let y = array![0.3, -2.0, 5.0];
        assert_eq!(compute_metrics(y.view(), y.view()).unwrap(), Metrics { mse: 0.0, mae: 0.0 });
    }

    #[test]
    fn rejects_empty_and_mismatch() {
        let e = ndarray::Array1::<f64>::zeros(0);
        assert!(matches!(compute_metrics(e.view(), e.view()), Err(Error::EmptySample)));
        assert!(compute_metrics(array![1.0].view(), array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
