//! Instance-weighted domain adaptation for regression under covariate shift.
//!
//! The centerpiece is [`wann`], an adversarial scheme that learns a task
//! network `h` together with a nonnegative weighting network `q` over the
//! combined source and target training rows, while an adversary `h'` tracks
//! the worst-case gap between target risk and `q`-weighted risk. The same
//! gap, estimated on its own, is available as [`wann::estimate_y_discrepancy`].
//!
//! Supporting modules:
//!
//! - [`nn`]: dense networks, backpropagation, Adam, weight clipping.
//! - [`baselines`]: uniform weighting, target only, KMM, KLIEP, TrAdaBoost.R2.
//! - [`data`]: synthetic generators, CSV ingestion, standard scaling.
//! - [`harness`]: seeded multi-run experiments, metrics and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
mod error;
pub mod harness;
pub mod nn;
pub mod wann;

pub use error::{Error, Result};
