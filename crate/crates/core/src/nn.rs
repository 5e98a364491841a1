//! Dense feed-forward classifier with reverse-mode gradients.
//!
//! A [`Model`] owns its parameter tensors. Differentiation runs through
//! [`Graph`]: bind the parameters into a graph, build the loss, call
//! `backward`, pull the gradients back into the parameter tensors with
//! [`Model::accumulate_grads`], and apply [`Model::sgd_step`].

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph, NodeId};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Row-major [out×in].
    pub weight: Tensor,
    /// Length `out`.
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let (out_dim, _in_dim) = weight.dims2()?;
        if bias.len() != out_dim {
            return Err(Error::shape(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                out_dim
            )));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.dims2().map(|(_, i)| i).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    layers: Vec<Layer>,
    num_classes: usize,
}

/// Graph node ids of one parameter binding: (weight, bias) per layer.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub layers: Vec<(NodeId, NodeId)>,
}

impl Model {
    pub fn new(layers: Vec<Layer>, num_classes: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("model needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let last = layers.last().unwrap().out_dim();
        if last != num_classes {
            return Err(Error::shape(format!(
                "final layer emits {last} values but the model has {num_classes} classes"
            )));
        }
        Ok(Model {
            layers,
            num_classes,
        })
    }

    /// Fresh model with ReLU hidden layers and an identity output layer.
    /// Xavier-uniform weights, zero biases, deterministic under `seed`.
    pub fn init(input_dim: usize, hidden: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::config("input_dim and num_classes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(num_classes);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            let activation = if layers.len() + 1 == dims.len() - 1 {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer::new(
                Tensor::matrix(fan_out, fan_in, weights)?,
                Tensor::new(vec![fan_out], vec![0.0; fan_out])?,
                activation,
            )?);
        }
        Model::new(layers, num_classes)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Pure forward pass: logits for a [B×D] input. Deterministic and
    /// bit-identical to the graph forward (same kernels).
    pub fn logits(&self, inputs: &Tensor) -> Result<Tensor> {
        let (batch, dim) = inputs.dims2()?;
        if dim != self.input_dim() {
            return Err(Error::shape(format!(
                "input width {} does not match model input width {}",
                dim,
                self.input_dim()
            )));
        }
        let mut cur = inputs.values().to_vec();
        let mut cur_dim = dim;
        for layer in &self.layers {
            let out_dim = layer.out_dim();
            let mut next = vec![0.0; batch * out_dim];
            graph::linear_forward(
                &cur,
                batch,
                cur_dim,
                layer.weight.values(),
                out_dim,
                layer.bias.values(),
                &mut next,
            );
            if layer.activation == Activation::Relu {
                let src = next.clone();
                graph::relu_forward(&src, &mut next);
            }
            cur = next;
            cur_dim = out_dim;
        }
        Tensor::matrix(batch, cur_dim, cur)
    }

    /// Row-stabilized softmax probabilities for a [B×D] input.
    pub fn probabilities(&self, inputs: &Tensor) -> Result<Tensor> {
        let logits = self.logits(inputs)?;
        let (rows, cols) = logits.dims2()?;
        let mut out = vec![0.0; rows * cols];
        graph::softmax_rows_forward(logits.values(), rows, cols, &mut out)?;
        Tensor::matrix(rows, cols, out)
    }

    /// Argmax predictions; ties break to the lowest class index.
    pub fn predict(&self, inputs: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(inputs)?;
        let (rows, cols) = logits.dims2()?;
        Ok((0..rows)
            .map(|r| argmax_lowest(&logits.values()[r * cols..(r + 1) * cols]))
            .collect())
    }

    /// Register the parameters as graph inputs (one binding per graph).
    pub fn bind_params(&self, g: &mut Graph) -> Result<ParamNodes> {
        let mut ids = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let w = g.input_tensor(&layer.weight)?;
            let b = g.input(1, layer.out_dim(), layer.bias.values().to_vec())?;
            ids.push((w, b));
        }
        Ok(ParamNodes { layers: ids })
    }

    /// Recorded forward pass through an existing parameter binding.
    /// Retains every intermediate in the graph so `backward` can run.
    pub fn forward_with(&self, g: &mut Graph, params: &ParamNodes, x: NodeId) -> Result<NodeId> {
        let (_, dim) = g.dims(x)?;
        if dim != self.input_dim() {
            return Err(Error::shape(format!(
                "input width {} does not match model input width {}",
                dim,
                self.input_dim()
            )));
        }
        let mut cur = x;
        for (layer, &(w, b)) in self.layers.iter().zip(&params.layers) {
            cur = g.linear(cur, w, b)?;
            if layer.activation == Activation::Relu {
                cur = g.relu(cur)?;
            }
        }
        Ok(cur)
    }

    /// Bind parameters and run one recorded forward pass.
    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<(NodeId, ParamNodes)> {
        let params = self.bind_params(g)?;
        let logits = self.forward_with(g, &params, x)?;
        Ok((logits, params))
    }

    /// Pull gradients for one binding out of a differentiated graph and add
    /// them into the parameter tensors.
    pub fn accumulate_grads(&mut self, g: &Graph, params: &ParamNodes) -> Result<()> {
        if params.layers.len() != self.layers.len() {
            return Err(Error::state("parameter binding does not match this model"));
        }
        for (layer, &(w, b)) in self.layers.iter_mut().zip(&params.layers) {
            let gw = g.grad(w)?.to_vec();
            let gb = g.grad(b)?.to_vec();
            layer.weight.accumulate_grad(&gw)?;
            layer.bias.accumulate_grad(&gb)?;
        }
        Ok(())
    }

    /// θ ← θ − lr·∇θ, then clear the gradients. Every parameter must have a
    /// populated gradient.
    pub fn sgd_step(&mut self, learning_rate: f64) -> Result<()> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            if layer.weight.grad().is_none() || layer.bias.grad().is_none() {
                return Err(Error::state(format!(
                    "sgd_step: layer {idx} has no gradients (run backward first)"
                )));
            }
        }
        for layer in &mut self.layers {
            apply_step(&mut layer.weight, learning_rate);
            apply_step(&mut layer.bias, learning_rate);
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for layer in &mut self.layers {
            layer.weight.clear_grad();
            layer.bias.clear_grad();
        }
    }

    // -- flat parameter view (finite-difference checks poke through this) ---

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn get_param(&self, index: usize) -> Result<f64> {
        let mut idx = index;
        for layer in &self.layers {
            if idx < layer.weight.len() {
                return Ok(layer.weight.values()[idx]);
            }
            idx -= layer.weight.len();
            if idx < layer.bias.len() {
                return Ok(layer.bias.values()[idx]);
            }
            idx -= layer.bias.len();
        }
        Err(Error::domain(format!(
            "parameter index {index} out of range"
        )))
    }

    pub fn set_param(&mut self, index: usize, value: f64) -> Result<()> {
        let mut idx = index;
        for layer in &mut self.layers {
            if idx < layer.weight.len() {
                layer.weight.values_mut()[idx] = value;
                return Ok(());
            }
            idx -= layer.weight.len();
            if idx < layer.bias.len() {
                layer.bias.values_mut()[idx] = value;
                return Ok(());
            }
            idx -= layer.bias.len();
        }
        Err(Error::domain(format!(
            "parameter index {index} out of range"
        )))
    }

    /// Gradient at a flat parameter index (after `accumulate_grads`).
    pub fn get_param_grad(&self, index: usize) -> Result<f64> {
        let mut idx = index;
        for layer in &self.layers {
            if idx < layer.weight.len() {
                let g = layer
                    .weight
                    .grad()
                    .ok_or_else(|| Error::state("weight gradient not populated"))?;
                return Ok(g[idx]);
            }
            idx -= layer.weight.len();
            if idx < layer.bias.len() {
                let g = layer
                    .bias
                    .grad()
                    .ok_or_else(|| Error::state("bias gradient not populated"))?;
                return Ok(g[idx]);
            }
            idx -= layer.bias.len();
        }
        Err(Error::domain(format!(
            "parameter index {index} out of range"
        )))
    }

    // -- checkpoint io -------------------------------------------------------

    pub fn to_checkpoint_string(&self) -> Result<String> {
        let record = CheckpointRecord {
            version: CHECKPOINT_VERSION,
            num_classes: self.num_classes,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    activation: l.activation,
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    weight: l.weight.values().to_vec(),
                    bias: l.bias.values().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        let record: CheckpointRecord = serde_json::from_str(s)?;
        if record.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {}",
                record.version
            )));
        }
        let mut layers = Vec::with_capacity(record.layers.len());
        for l in record.layers {
            layers.push(Layer::new(
                Tensor::matrix(l.out_dim, l.in_dim, l.weight)?,
                Tensor::new(vec![l.out_dim], l.bias)?,
                l.activation,
            )?);
        }
        Model::new(layers, record.num_classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)?;
        Model::from_checkpoint_str(&s)
    }
}

pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    version: u32,
    num_classes: usize,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    activation: Activation,
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// A labeled minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (rows, _) = inputs.dims2()?;
        if rows == 0 {
            return Err(Error::domain("batch must contain at least one sample"));
        }
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "{} labels for {} input rows",
                labels.len(),
                rows
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

fn apply_step(t: &mut Tensor, lr: f64) {
    let grad = t.grad().expect("checked above").to_vec();
    for (v, g) in t.values_mut().iter_mut().zip(&grad) {
        *v -= lr * g;
    }
    t.clear_grad();
}
