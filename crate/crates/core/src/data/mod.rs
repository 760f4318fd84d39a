//! Samples, synthetic generators, CSV ingestion and standard scaling.

mod csv_io;
mod scaler;
mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, CsvData, CsvSchema};
pub use scaler::ScalerState;
pub use synthetic::{
    gen_cortes_synthetic, gen_uniform_shift_1d, labeling_fn, CortesData, CortesSyntheticSpec,
    UniformShiftData,
};

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Inputs with one real label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl LabeledSample {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample contains non-finite values"));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
        }
    }
}

/// Source and target rows combined, with a per-row domain tag.
///
/// Row order is meaningful: every method trained on a set sees the rows in
/// the same order before its own shuffling.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub is_target: Vec<bool>,
}

impl TrainingSet {
    pub fn new(x: Array2<f64>, y: Array1<f64>, is_target: Vec<bool>) -> Result<Self> {
        let sample = LabeledSample::new(x, y)?;
        if is_target.len() != sample.len() {
            return Err(Error::invalid(format!(
                "{} domain tags for {} rows",
                is_target.len(),
                sample.len()
            )));
        }
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self {
            x: sample.x,
            y: sample.y,
            is_target,
        })
    }

    /// Stacks a source sample on top of a target sample.
    pub fn from_parts(source: &LabeledSample, target: &LabeledSample) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::invalid("source and target have different widths"));
        }
        let x = ndarray::concatenate(Axis(0), &[source.x.view(), target.x.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let y = ndarray::concatenate(Axis(0), &[source.y.view(), target.y.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut is_target = vec![false; source.len()];
        is_target.resize(source.len() + target.len(), true);
        Self::new(x, y, is_target)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_source(&self) -> usize {
        self.is_target.iter().filter(|t| !**t).count()
    }

    pub fn n_target(&self) -> usize {
        self.is_target.iter().filter(|t| **t).count()
    }

    pub fn source_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_target[i]).collect()
    }

    pub fn target_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_target[i]).collect()
    }

    pub fn source(&self) -> LabeledSample {
        self.as_sample().select(&self.source_indices())
    }

    pub fn target(&self) -> LabeledSample {
        self.as_sample().select(&self.target_indices())
    }

    pub fn as_sample(&self) -> LabeledSample {
        LabeledSample {
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }

    /// Fails unless the set has at least one source and one target row.
    pub fn require_both_domains(&self) -> Result<()> {
        match (self.n_source(), self.n_target()) {
            (0, _) => Err(Error::invalid("training set has no source rows")),
            (_, 0) => Err(Error::invalid("training set has no target rows")),
            _ => Ok(()),
        }
    }
}
