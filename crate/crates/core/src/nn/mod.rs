//! Dense scalar-output networks with exact reverse-mode gradients.
//!
//! Everything here is `f64` and single-threaded. A network is a stack of
//! [`DenseLayer`]s; the last layer has one output unit. Parameters can be
//! confined to a box `[-C, C]` (weight clipping), which is enforced after
//! every optimizer step.

mod adam;
mod fit;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use fit::{fit_regression, fit_regression_with, FitConfig};
pub use mlp::{Architecture, DenseLayer, GradBundle, LayerGrad, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at `z`. The relu subgradient at 0 is taken as 0.
    #[inline]
    pub(crate) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Forward-pass mode.
///
/// In `Train` mode dropout masks are drawn from a generator seeded with
/// `mask_seed`, so a loss and its gradient evaluated with the same seed see
/// the same masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { mask_seed: u64 },
}
