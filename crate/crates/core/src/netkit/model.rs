//! Model structure, initialization, and the forward/backward passes.

use crate::error::{Error, Result};
use crate::prob::LogitVec;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
        }
    }
}

/// One affine layer: `w` is `fan_out x fan_in` row-major, `b` has length
/// `fan_out`. Also reused as the container shape for gradients and optimizer
/// velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn zeros(fan_out: usize, fan_in: usize) -> Self {
        DenseLayer {
            w: vec![vec![0.0; fan_in]; fan_out],
            b: vec![0.0; fan_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub seed: u64,
    pub tag: String,
}

/// Fully-connected ReLU classifier producing `K` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layer_dims: Vec<usize>,
    pub(crate) activation: Activation,
    pub(crate) layers: Vec<DenseLayer>,
    pub(crate) meta: ModelMeta,
}

impl MlpModel {
    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.meta.tag = tag.into();
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.b.len() * (l.w[0].len() + 1))
            .sum()
    }

    pub(crate) fn from_parts(
        layer_dims: Vec<usize>,
        activation: Activation,
        layers: Vec<DenseLayer>,
        meta: ModelMeta,
    ) -> Self {
        MlpModel {
            layer_dims,
            activation,
            layers,
            meta,
        }
    }

    /// Logits for one input, without keeping intermediate activations.
    pub fn logits(&self, x: &[f64]) -> Result<LogitVec> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            h = affine(layer, &h);
            if idx < last {
                relu_inplace(&mut h);
            }
        }
        LogitVec::new(h)
    }

    /// Logits plus the per-layer inputs needed by
    /// [`MlpModel::backward_from_logit_grad`].
    pub fn forward_logits(&self, x: &[f64]) -> Result<(LogitVec, ForwardCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            h = affine(layer, &h);
            if idx < last {
                relu_inplace(&mut h);
            }
        }
        Ok((
            LogitVec::new(h)?,
            ForwardCache {
                layer_dims: self.layer_dims.clone(),
                inputs,
            },
        ))
    }

    /// Reverse-mode pass from a gradient over the logits down to parameter
    /// gradients. The ReLU subgradient at 0 is 0.
    pub fn backward_from_logit_grad(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
    ) -> Result<ParamGrads> {
        if cache.layer_dims != self.layer_dims || cache.inputs.len() != self.layers.len() {
            return Err(Error::invalid_state(
                "forward cache does not belong to this model",
            ));
        }
        for (idx, input) in cache.inputs.iter().enumerate() {
            if input.len() != self.layer_dims[idx] {
                return Err(Error::invalid_state(format!(
                    "cached input {idx} has length {}, expected {}",
                    input.len(),
                    self.layer_dims[idx]
                )));
            }
        }
        if grad_logits.len() != self.output_dim() {
            return Err(Error::invalid_argument(format!(
                "logit gradient has {} entries, expected {}",
                grad_logits.len(),
                self.output_dim()
            )));
        }

        let mut grads = ParamGrads::zeros_like(self);
        let mut delta = grad_logits.to_vec();
        for idx in (0..self.layers.len()).rev() {
            let input = &cache.inputs[idx];
            let grad_layer = &mut grads.layers[idx];
            for (row, d) in delta.iter().enumerate() {
                grad_layer.b[row] = *d;
                for (col, x) in input.iter().enumerate() {
                    grad_layer.w[row][col] = d * x;
                }
            }
            if idx > 0 {
                let layer = &self.layers[idx];
                let mut prev = vec![0.0; input.len()];
                for (row, d) in delta.iter().enumerate() {
                    for (col, p) in prev.iter_mut().enumerate() {
                        *p += layer.w[row][col] * d;
                    }
                }
                // input to this layer is post-ReLU; positive entries mark
                // where the activation passed gradient through
                for (p, x) in prev.iter_mut().zip(input) {
                    if *x <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// All parameters in a fixed order: per layer, weights row-major then
    /// biases. Together with [`MlpModel::set_params_flat`] this gives tests
    /// and probes a stable way to walk the parameter vector.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            for row in &layer.w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::invalid_argument(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_argument("parameters must be finite"));
        }
        let mut it = values.iter();
        for layer in &mut self.layers {
            for row in &mut layer.w {
                for v in row.iter_mut() {
                    *v = *it.next().unwrap();
                }
            }
            for v in &mut layer.b {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid_argument(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

fn affine(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    layer
        .w
        .iter()
        .zip(&layer.b)
        .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect()
}

fn relu_inplace(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_dims: Vec<usize>,
    /// `inputs[l]` is the vector fed into layer `l` (so `inputs[0]` is the
    /// sample itself and the rest are post-ReLU activations).
    inputs: Vec<Vec<f64>>,
}

/// Parameter gradients, shaped exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<DenseLayer>,
}

impl ParamGrads {
    pub fn zeros_like(model: &MlpModel) -> Self {
        ParamGrads {
            layers: model
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.b.len(), l.w[0].len()))
                .collect(),
        }
    }

    /// Adds another gradient set in place; shapes must match.
    pub fn accumulate(&mut self, other: &ParamGrads) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::invalid_argument("gradient layer count mismatch"));
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            if mine.b.len() != theirs.b.len() || mine.w[0].len() != theirs.w[0].len() {
                return Err(Error::invalid_argument("gradient shape mismatch"));
            }
            for (mrow, trow) in mine.w.iter_mut().zip(&theirs.w) {
                for (m, t) in mrow.iter_mut().zip(trow) {
                    *m += t;
                }
            }
            for (m, t) in mine.b.iter_mut().zip(&theirs.b) {
                *m += t;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for row in &mut layer.w {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
            for v in &mut layer.b {
                *v *= factor;
            }
        }
    }

    /// Gradients flattened in the same order as [`MlpModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for row in &layer.w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.b);
        }
        out
    }
}

/// Builds a model with uniform fan-based initialization: weights i.i.d. on
/// the open interval `(-s, s)` with `s = sqrt(6 / (fan_in + fan_out))`,
/// biases zero. The same `(dims, seed)` always yields bit-identical
/// parameters.
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "model needs at least input and output dims, got {layer_dims:?}"
        )));
    }
    for (i, dim) in layer_dims.iter().enumerate() {
        if *dim == 0 {
            return Err(Error::invalid_argument(format!(
                "layer dim {i} must be >= 1"
            )));
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for window in layer_dims.windows(2) {
        let (fan_in, fan_out) = (window[0], window[1]);
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut layer = DenseLayer::zeros(fan_out, fan_in);
        for row in &mut layer.w {
            for v in row.iter_mut() {
                // rejection keeps the interval strictly open
                *v = loop {
                    let candidate = -s + 2.0 * s * rng.next_f64();
                    if candidate.abs() < s {
                        break candidate;
                    }
                };
            }
        }
        layers.push(layer);
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        activation: Activation::Relu,
        layers,
        meta: ModelMeta {
            seed,
            tag: String::new(),
        },
    })
}
