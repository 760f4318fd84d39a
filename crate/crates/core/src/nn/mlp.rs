use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, Mode};
use crate::error::{Error, Result};

/// One affine map followed by an element-wise activation.
///
/// `weights` is laid out `[in × out]` so a batch `X [b × in]` maps to
/// `X · W + b`. Dropout (inverted) is applied to this layer's outputs in
/// training mode only.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Layer sizes and options from which networks of one hypothesis class are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Dropout rate after each hidden layer; empty means no dropout.
    pub hidden_dropout: Vec<f64>,
    pub output_activation: Activation,
    pub clip: Option<f64>,
}

impl Architecture {
    /// Relu hidden layers of the given widths, identity output, no clipping.
    pub fn new(input_dim: usize, hidden: &[usize]) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            hidden_dropout: Vec::new(),
            output_activation: Activation::Identity,
            clip: None,
        }
    }

    pub fn with_clip(mut self, clip: Option<f64>) -> Self {
        self.clip = clip;
        self
    }

    pub fn with_output(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn with_dropout(mut self, rates: &[f64]) -> Self {
        self.hidden_dropout = rates.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if !self.hidden_dropout.is_empty() && self.hidden_dropout.len() != self.hidden.len() {
            return Err(Error::invalid(format!(
                "{} dropout rates given for {} hidden layers",
                self.hidden_dropout.len(),
                self.hidden.len()
            )));
        }
        if self
            .hidden_dropout
            .iter()
            .any(|r| !(0.0..1.0).contains(r))
        {
            return Err(Error::invalid("dropout rates must lie in [0, 1)"));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clip constant must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases, then projected onto the clip box.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Mlp> {
        self.validate()?;
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim;
        let widths = self.hidden.iter().copied().chain(std::iter::once(1));
        for (k, out) in widths.enumerate() {
            let is_output = k == self.hidden.len();
            let limit = (6.0 / (fan_in + out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_in, out), || {
                rng.random_range(-limit..=limit)
            });
            layers.push(DenseLayer {
                weights,
                biases: Array1::zeros(out),
                activation: if is_output {
                    self.output_activation
                } else {
                    Activation::Relu
                },
                dropout_rate: if is_output {
                    0.0
                } else {
                    self.hidden_dropout.get(k).copied().unwrap_or(0.0)
                },
            });
            fan_in = out;
        }
        let mut net = Mlp {
            layers,
            clip: self.clip,
            output_scale: 1.0,
        };
        net.clip_weights();
        Ok(net)
    }
}

/// Feed-forward network with a single output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    clip: Option<f64>,
    /// Fixed factor applied to the output; not a trainable parameter.
    output_scale: f64,
}

/// Gradient of one layer's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Per-parameter gradients, shape-congruent with the [`Mlp`] they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub layers: Vec<LayerGrad>,
}

impl GradBundle {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.biases *= factor;
        }
    }

    pub fn is_congruent(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.dim() == l.weights.dim() && g.biases.len() == l.biases.len()
            })
    }

    /// Flattened copy in layer order, weights (row-major) then biases.
    pub fn to_vec(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.biases.iter()).copied())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate values kept from a forward pass for backpropagation.
pub(crate) struct Tape {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    pub(crate) output: Array1<f64>,
}

impl Mlp {
    /// Assembles a network from explicit layers, checking that the shapes chain
    /// and that the last layer has a single output.
    pub fn from_layers(layers: Vec<DenseLayer>, clip: Option<f64>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("a network needs at least one layer"));
        };
        if last.out_dim() != 1 {
            return Err(Error::invalid("only scalar-output networks are supported"));
        }
        if last.dropout_rate != 0.0 {
            return Err(Error::invalid("the output layer cannot use dropout"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.biases.len() != l.out_dim() || l.in_dim() == 0 {
                return Err(Error::invalid(format!("layer {k} has inconsistent shapes")));
            }
            if !(0.0..1.0).contains(&l.dropout_rate) {
                return Err(Error::invalid(format!("layer {k} dropout outside [0, 1)")));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::invalid(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        if let Some(c) = clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clip constant must be positive, got {c}")));
            }
        }
        Ok(Self {
            layers,
            clip,
            output_scale: 1.0,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn clip(&self) -> Option<f64> {
        self.clip
    }

    pub fn set_clip(&mut self, clip: Option<f64>) {
        self.clip = clip;
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn set_output_activation(&mut self, activation: Activation) {
        let last = self.layers.len() - 1;
        self.layers[last].activation = activation;
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Multiplies every output by `scale` from now on. Gradients follow.
    pub fn set_output_scale(&mut self, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("output scale must be positive, got {scale}")));
        }
        self.output_scale = scale;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flattened parameters, in the same order as [`GradBundle::to_vec`].
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    /// Overwrites parameters from a flat slice laid out as [`Mlp::params`].
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Projects every parameter onto `[-C, C]`. No-op without a clip constant.
    pub fn clip_weights(&mut self) {
        let Some(c) = self.clip else { return };
        for l in &mut self.layers {
            l.weights.mapv_inplace(|v| v.clamp(-c, c));
            l.biases.mapv_inplace(|v| v.clamp(-c, c));
        }
    }

    /// Copy of the network with [`Mlp::clip_weights`] applied.
    pub fn clipped(&self) -> Self {
        let mut net = self.clone();
        net.clip_weights();
        net
    }

    pub(crate) fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// One output per input row.
    pub fn forward(&self, x: ArrayView2<f64>, mode: Mode) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        if matches!(mode, Mode::Eval) || self.layers.iter().all(|l| l.dropout_rate == 0.0) {
            return Ok(self.forward_eval(x));
        }
        Ok(self.forward_tape(x, mode).output)
    }

    fn forward_eval(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = self.affine(0, x);
        for k in 1..self.layers.len() {
            a = self.affine(k, a.view());
        }
        let out = a.column(0).to_owned();
        if self.output_scale == 1.0 {
            out
        } else {
            out * self.output_scale
        }
    }

    /// `activation(a · W + b)` for layer `k`.
    fn affine(&self, k: usize, a: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[k];
        let mut z = a.dot(&layer.weights);
        z += &layer.biases;
        if layer.activation != Activation::Identity {
            z.mapv_inplace(|v| layer.activation.apply(v));
        }
        z
    }

    pub(crate) fn forward_tape(&self, x: ArrayView2<f64>, mode: Mode) -> Tape {
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers);
        let mut mask_rng = match mode {
            Mode::Train { mask_seed } => Some(ChaCha8Rng::seed_from_u64(mask_seed)),
            Mode::Eval => None,
        };
        let mut a = x.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights);
            z += &layer.biases;
            let mut out = z.mapv(|v| layer.activation.apply(v));
            let mask = match mask_rng.as_mut() {
                Some(rng) if layer.dropout_rate > 0.0 => {
                    let keep = 1.0 - layer.dropout_rate;
                    let m = Array2::from_shape_simple_fn(out.raw_dim(), || {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(std::mem::replace(&mut a, out));
            pre_activations.push(z);
            masks.push(mask);
        }
        Tape {
            inputs,
            pre_activations,
            masks,
            output: a.column(0).to_owned() * self.output_scale,
        }
    }

    pub(crate) fn backward(&self, tape: &Tape, dout: ArrayView1<f64>) -> GradBundle {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = (dout.to_owned() * self.output_scale).insert_axis(Axis(1));
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if let Some(mask) = &tape.masks[k] {
                g *= mask;
            }
            if layer.activation != Activation::Identity {
                Zip::from(&mut g)
                    .and(&tape.pre_activations[k])
                    .for_each(|gv, &z| *gv *= layer.activation.derivative(z));
            }
            let d_weights = tape.inputs[k].t().dot(&g);
            let d_biases = g.sum_axis(Axis(0));
            if k > 0 {
                g = g.dot(&layer.weights.t());
            }
            grads.push(LayerGrad {
                weights: d_weights,
                biases: d_biases,
            });
        }
        grads.reverse();
        GradBundle { layers: grads }
    }

    /// Outputs and the parameter gradient of `Σᵢ doutᵢ · net(xᵢ)`.
    pub fn output_vjp(
        &self,
        x: ArrayView2<f64>,
        dout: ArrayView1<f64>,
        mode: Mode,
    ) -> Result<(Array1<f64>, GradBundle)> {
        self.check_input(&x)?;
        if dout.len() != x.nrows() {
            return Err(Error::invalid(format!(
                "{} output cotangents for {} rows",
                dout.len(),
                x.nrows()
            )));
        }
        let tape = self.forward_tape(x, mode);
        let grads = self.backward(&tape, dout);
        Ok((tape.output, grads))
    }

    /// `Σᵢ wᵢ (net(xᵢ) − yᵢ)²` and its exact parameter gradient.
    ///
    /// Weights may be negative; the adversarial updates rely on signed
    /// per-example factors.
    pub fn weighted_mse_grad(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        w: ArrayView1<f64>,
        mode: Mode,
    ) -> Result<(f64, GradBundle)> {
        self.check_input(&x)?;
        let b = x.nrows();
        if b == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if y.len() != b || w.len() != b {
            return Err(Error::invalid(format!(
                "batch of {b} rows with {} labels and {} weights",
                y.len(),
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite example weight"));
        }
        let tape = self.forward_tape(x, mode);
        let mut loss = 0.0;
        let dout = Zip::from(&tape.output)
            .and(&y)
            .and(&w)
            .map_collect(|&p, &t, &wi| {
                let r = p - t;
                loss += wi * r * r;
                2.0 * wi * r
            });
        let grads = self.backward(&tape, dout.view());
        Ok((loss, grads))
    }

    /// `Σᵢ wᵢ (net(xᵢ) − yᵢ)²` without gradients (evaluation mode).
    pub fn weighted_mse(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, w: ArrayView1<f64>) -> Result<f64> {
        if y.len() != x.nrows() || w.len() != x.nrows() {
            return Err(Error::invalid("length mismatch among inputs, labels and weights"));
        }
        let out = self.forward(x, Mode::Eval)?;
        Ok(Zip::from(&out)
            .and(&y)
            .and(&w)
            .fold(0.0, |acc, &p, &t, &wi| acc + wi * (p - t) * (p - t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn linear(weights: Array2<f64>, bias: f64) -> Mlp {
        Mlp::from_layers(
            vec![DenseLayer {
                weights,
                biases: array![bias],
                activation: Activation::Identity,
                dropout_rate: 0.0,
            }],
            None,
        )
        .unwrap()
    }

    #[test]
    fn linear_map_by_hand() {
        let net = linear(array![[1.0], [1.0]], 0.0);
        let out = net.forward(array![[1.0, 2.0]].view(), Mode::Eval).unwrap();
        assert_eq!(out, array![3.0]);
    }

    #[test]
    fn zero_net_with_relu_output_is_zero() {
        let arch = Architecture::new(3, &[4, 2]).with_output(Activation::Relu);
        let mut net = arch.build(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let zeros = vec![0.0; net.num_params()];
        net.set_params(&zeros).unwrap();
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, -9.0]];
        assert_eq!(net.forward(x.view(), Mode::Eval).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn two_layer_chain_matches_hand_product() {
        // hidden: relu([x1, x2] · [[1, -1], [2, 0.5]] + [0.5, -1])
        // output: identity(h · [[2], [-3]] + 0.25)
        let net = Mlp::from_layers(
            vec![
                DenseLayer {
                    weights: array![[1.0, -1.0], [2.0, 0.5]],
                    biases: array![0.5, -1.0],
                    activation: Activation::Relu,
                    dropout_rate: 0.0,
                },
                DenseLayer {
                    weights: array![[2.0], [-3.0]],
                    biases: array![0.25],
                    activation: Activation::Identity,
                    dropout_rate: 0.0,
                },
            ],
            None,
        )
        .unwrap();
        // row 1: x = (1, 2): z = (1+4+0.5, -1+1-1) = (5.5, -1) -> h = (5.5, 0) -> 11 + 0.25
        // row 2: x = (-1, 3): z = (-1+6+0.5, 1+1.5-1) = (5.5, 1.5) -> 11 - 4.5 + 0.25
        let out = net
            .forward(array![[1.0, 2.0], [-1.0, 3.0]].view(), Mode::Eval)
            .unwrap();
        assert_eq!(out, array![11.25, 6.75]);
    }

    #[test]
    fn rejects_wrong_input_width() {
        let net = linear(array![[1.0], [1.0]], 0.0);
        let err = net.forward(array![[1.0, 2.0, 3.0]].view(), Mode::Eval);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_incompatible_layers() {
        let a = DenseLayer {
            weights: Array2::zeros((2, 3)),
            biases: Array1::zeros(3),
            activation: Activation::Relu,
            dropout_rate: 0.0,
        };
        let b = DenseLayer {
            weights: Array2::zeros((2, 1)),
            biases: Array1::zeros(1),
            activation: Activation::Identity,
            dropout_rate: 0.0,
        };
        assert!(Mlp::from_layers(vec![a, b], None).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let net = linear(array![[2.0], [-1.0]], 0.5);
        let x = array![[1.0, 1.0], [0.0, 3.0], [2.0, -1.0]];
        let y = net.forward(x.view(), Mode::Eval).unwrap();
        let w = array![0.2, 0.3, 0.5];
        let (loss, grads) = net
            .weighted_mse_grad(x.view(), y.view(), w.view(), Mode::Eval)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn zero_weights_give_zero_loss_and_gradient() {
        let arch = Architecture::new(3, &[5]);
        let net = arch.build(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.0, 1.0]];
        let y = array![4.0, -2.0];
        let (loss, grads) = net
            .weighted_mse_grad(x.view(), y.view(), Array1::zeros(2).view(), Mode::Eval)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let net = linear(array![[1.0]], 0.0);
        let x = array![[1.0], [2.0]];
        let r = net.weighted_mse_grad(x.view(), array![1.0].view(), array![1.0, 1.0].view(), Mode::Eval);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn clip_projects_and_is_idempotent() {
        let mut net = linear(array![[2.0], [-0.3]], -5.0);
        net.set_clip(Some(1.0));
        net.clip_weights();
        assert_eq!(net.params(), vec![1.0, -0.3, -1.0]);
        let again = net.clipped();
        assert_eq!(again, net);
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let arch = Architecture::new(4, &[16, 16]).with_dropout(&[0.5, 0.5]);
        let net = arch.build(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64) - (j as f64) * 0.3);
        let e1 = net.forward(x.view(), Mode::Eval).unwrap();
        let e2 = net.forward(x.view(), Mode::Eval).unwrap();
        assert_eq!(e1, e2);
        let t1 = net.forward(x.view(), Mode::Train { mask_seed: 1 }).unwrap();
        let t1b = net.forward(x.view(), Mode::Train { mask_seed: 1 }).unwrap();
        let t2 = net.forward(x.view(), Mode::Train { mask_seed: 2 }).unwrap();
        assert_eq!(t1, t1b);
        assert_ne!(t1, e1);
        assert_ne!(t1, t2);
    }
}
