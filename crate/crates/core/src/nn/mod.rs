//! Dense networks with reverse-mode gradients.
//!
//! A [`Sequential`] is a flat list of dense, activation and dropout layers.
//! [`Sequential::forward`] records a [`Tape`] of layer inputs and dropout
//! masks; [`Sequential::backward`] turns an upstream gradient into parameter
//! and input gradients. [`Sequential::input_grad_penalty`] differentiates the
//! gradient-penalty term through the backward pass itself (double backprop).
//!
//! All arithmetic is `f64`. Batches are `rows = samples`.

pub mod checkpoint;
mod optim;
mod penalty;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng as _;
use thiserror::Error;

use crate::rng;

pub use optim::{adam_step, rmsprop_step, AdamState, RmsPropState};
pub use penalty::PenaltyOutput;

/// Row-major `rows × cols` matrix of `f64`.
pub type Tensor = Array2<f64>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer}: expected {expected} input columns, got {got}")]
    DimMismatch { layer: usize, expected: usize, got: usize },
    #[error("layer {layer} ({kind}): non-finite value")]
    NonFinite { layer: usize, kind: &'static str },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Identity,
}

impl ActivationKind {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Identity => x,
        }
    }

    /// First derivative with respect to the pre-activation.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Identity => 1.0,
        }
    }

    /// Second derivative; piecewise-linear activations are zero away from
    /// their kink.
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::LeakyRelu(_) | ActivationKind::Identity => 0.0,
            ActivationKind::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            ActivationKind::LeakyRelu(_) => "leaky_relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Identity => "identity",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut rng::Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((output, input), || rng.random_range(-limit..=limit));
        DenseLayer {
            weight,
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Activation(ActivationKind),
    /// Drop probability in `[0, 1)`.
    Dropout(f64),
}

impl Layer {
    fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Activation(a) => a.name(),
            Layer::Dropout(_) => "dropout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks derived from the seed.
    Train { seed: u64 },
    Eval,
}

/// Per-layer inputs and dropout masks recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Tensor>,
    /// Scaled keep masks (`mask / keep_prob`) for dropout layers in train mode.
    masks: Vec<Option<Tensor>>,
}

/// Gradients for every dense layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dense: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(net: &Sequential) -> Self {
        Gradients {
            dense: net
                .dense_layers()
                .map(|d| DenseLayer {
                    weight: Array2::zeros(d.weight.raw_dim()),
                    bias: Array1::zeros(d.bias.len()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        self.dense
            .iter()
            .flat_map(|d| {
                [
                    d.weight.as_slice().expect("standard layout"),
                    d.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut width: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    if d.bias.len() != d.output_dim() {
                        return Err(NnError::Invalid(format!("layer {i}: bias length mismatch")));
                    }
                    if let Some(w) = width {
                        if w != d.input_dim() {
                            return Err(NnError::DimMismatch { layer: i, expected: d.input_dim(), got: w });
                        }
                    }
                    width = Some(d.output_dim());
                }
                Layer::Activation(ActivationKind::LeakyRelu(slope)) if !(*slope > 0.0) => {
                    return Err(NnError::Invalid(format!("layer {i}: leaky slope must be positive")));
                }
                Layer::Dropout(rate) if !(0.0..1.0).contains(rate) => {
                    return Err(NnError::Invalid(format!("layer {i}: dropout rate must lie in [0, 1)")));
                }
                _ => {}
            }
        }
        if width.is_none() {
            return Err(NnError::Invalid("network needs at least one dense layer".into()));
        }
        Ok(Sequential { layers })
    }

    /// Builds `dense(widths[0] -> widths[1]), act, ...` with Glorot init.
    pub fn builder(input_dim: usize) -> Builder {
        Builder {
            width: input_dim,
            layers: Vec::new(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn dense_layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dense_layers().next().expect("validated").input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.dense_layers().last().expect("validated").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.dense_layers().map(|d| d.weight.len() + d.bias.len()).sum()
    }

    /// Mutable parameter blocks in the same order as [`Gradients::blocks`].
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.dense_layers_mut()
            .flat_map(|d| {
                [
                    d.weight.as_slice_mut().expect("standard layout"),
                    d.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn forward(&self, batch: &Tensor, mode: Mode) -> Result<(Tensor, Tape)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        check_finite(&x, 0, "input")?;
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, mask) = self.layer_forward(i, layer, &x, mode)?;
            check_finite(&y, i, layer.kind())?;
            inputs.push(x);
            masks.push(mask);
            x = y;
        }
        Ok((x, Tape { inputs, masks }))
    }

    /// Eval-mode forward without a tape.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = self.layer_forward(i, layer, &x, Mode::Eval)?.0;
            check_finite(&x, i, layer.kind())?;
        }
        Ok(x)
    }

    fn layer_forward(&self, i: usize, layer: &Layer, x: &Tensor, mode: Mode) -> Result<(Tensor, Option<Tensor>)> {
        Ok(match layer {
            Layer::Dense(d) => {
                if x.ncols() != d.input_dim() {
                    return Err(NnError::DimMismatch { layer: i, expected: d.input_dim(), got: x.ncols() });
                }
                let mut y = x.dot(&d.weight.t());
                y += &d.bias;
                (y, None)
            }
            Layer::Activation(a) => (x.mapv(|v| a.apply(v)), None),
            Layer::Dropout(rate) => match mode {
                Mode::Train { seed } if *rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mut r = rng::stream(seed, rng::DROPOUT, i as u64);
                    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    (x * &mask, Some(mask))
                }
                _ => (x.clone(), None),
            },
        })
    }

    /// Gradients of `sum(upstream ⊙ output)` with respect to every parameter
    /// and to the input batch.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> (Gradients, Tensor) {
        let mut grads = Gradients::zeros_like(self);
        let mut slot = grads.dense.len();
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[i];
            g = match layer {
                Layer::Dense(d) => {
                    slot -= 1;
                    grads.dense[slot].weight = g.t().dot(x);
                    grads.dense[slot].bias = g.sum_axis(Axis(0));
                    g.dot(&d.weight)
                }
                Layer::Activation(a) => {
                    Zip::from(&mut g).and(x).for_each(|gv, &xv| *gv *= a.derivative(xv));
                    g
                }
                Layer::Dropout(_) => match &tape.masks[i] {
                    Some(mask) => g * mask,
                    None => g,
                },
            };
        }
        (grads, g)
    }
}

pub struct Builder {
    width: usize,
    layers: Vec<Layer>,
}

impl Builder {
    pub fn dense(mut self, output: usize, rng: &mut rng::Rng) -> Self {
        self.layers.push(Layer::Dense(DenseLayer::glorot(self.width, output, rng)));
        self.width = output;
        self
    }

    pub fn activation(mut self, kind: ActivationKind) -> Self {
        self.layers.push(Layer::Activation(kind));
        self
    }

    pub fn dropout(mut self, rate: f64) -> Self {
        self.layers.push(Layer::Dropout(rate));
        self
    }

    pub fn build(self) -> Result<Sequential> {
        Sequential::new(self.layers)
    }
}

pub(crate) fn check_finite(t: &Tensor, layer: usize, kind: &'static str) -> Result<()> {
    if t.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite { layer, kind })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub(crate) fn random_net(seed: u64, dims: &[usize], acts: &[ActivationKind]) -> Sequential {
        let mut r = rng::from_seed(seed);
        let mut b = Sequential::builder(dims[0]);
        for (k, w) in dims[1..].iter().enumerate() {
            b = b.dense(*w, &mut r);
            b = b.activation(acts[k % acts.len()]);
        }
        // Give biases non-zero values so their gradients are exercised.
        let mut net = b.build().unwrap();
        for d in net.dense_layers_mut() {
            d.bias.mapv_inplace(|_| r.random_range(-0.5..0.5));
        }
        net
    }

    pub(crate) fn random_batch(seed: u64, rows: usize, cols: usize) -> Tensor {
        let mut r = rng::from_seed(seed);
        Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
    }

    pub(crate) fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
    }
}
