//! Small dense networks with a hand-written backward pass.
//!
//! Weights of a layer are stored row-major as `outputs x inputs`, so
//! `weights[o * inputs + i]` connects input `i` to output `o`. Hidden layers
//! use a rectifier; the output layer is linear or tanh.

mod adam;

pub use adam::{AdamConfig, AdamState};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Weights and biases are drawn from `U(-s, s)` with `s = INIT_SCALE / sqrt(fan_in)`.
pub const INIT_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in self.weights.chunks_exact(self.inputs).zip(&self.biases).enumerate() {
            out[o] = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Fully connected feed-forward network.
///
/// Serializes to the versioned checkpoint layout (`version`, `layer_sizes`,
/// activations, per-layer row-major `weights` and `biases`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint", try_from = "Checkpoint")]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

/// Parameter-shaped buffer; used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Per-layer activations retained by a forward pass for use in backward.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    /// `values[0]` is the input, `values[k]` the post-activation output of layer `k - 1`.
    values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Serialize, Deserialize)]
#[doc(hidden)]
pub struct Checkpoint {
    version: u32,
    layer_sizes: Vec<usize>,
    hidden_activation: String,
    output_activation: OutputActivation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Randomly initialised network with the given widths, input first.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output)?;
        for layer in &mut net.layers {
            let s = INIT_SCALE / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = rng.random_range(-s..s);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::invalid(
                "layer_sizes",
                format!("need at least two non-zero widths, got {layer_sizes:?}"),
            ));
        }
        let layers = layer_sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, output })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate for a later [`Mlp::backward_into`].
    pub fn forward_cached(&self, x: &[f64], acts: &mut Activations) -> Result<()> {
        self.check_input(x)?;
        acts.values.resize(self.layers.len() + 1, Vec::new());
        acts.values[0].clear();
        acts.values[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (before, after) = acts.values.split_at_mut(k + 1);
            let out = &mut after[0];
            out.resize(layer.outputs, 0.0);
            layer.affine(&before[k], out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut acts = Activations::default();
        self.forward_cached(x, &mut acts)?;
        Ok(acts.values.pop().unwrap_or_default())
    }

    /// Accumulates parameter gradients of the loss whose gradient with respect
    /// to the network output is `upstream` into `grads`, and returns the
    /// gradient with respect to the input. `acts` must come from
    /// [`Mlp::forward_cached`] on this network.
    pub fn backward_into(&self, acts: &Activations, upstream: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if acts.values.len() != self.layers.len() + 1 {
            return Err(Error::ShapeMismatch {
                expected: self.layers.len() + 1,
                got: acts.values.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = upstream.to_vec();
        if self.output == OutputActivation::Tanh {
            for (d, y) in delta.iter_mut().zip(&acts.values[last + 1]) {
                *d *= 1.0 - y * y;
            }
        }
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            let input = &acts.values[k];
            let g = &mut grads.layers[k];
            for (o, d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if k > 0 {
                // ReLU derivative: the stored hidden output is positive iff active.
                for (p, h) in prev.iter_mut().zip(input) {
                    if *h <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Gradients of `upstream . f(x)` with respect to parameters and input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut acts = Activations::default();
        self.forward_cached(x, &mut acts)?;
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(&acts, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.layer_sizes() != other.layer_sizes() {
            return Err(Error::ShapeMismatch {
                expected: self.param_count(),
                got: other.param_count(),
            });
        }
        Ok(())
    }

    /// Blends `online` into `self`: `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid("tau", format!("must lie in [0, 1], got {tau}")));
        }
        self.check_same_shape(online)?;
        if tau == 1.0 {
            self.layers.clone_from(&online.layers);
            return Ok(());
        }
        for (t, o) in self.params_mut().zip(online.params()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl From<Mlp> for Checkpoint {
    fn from(net: Mlp) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            layer_sizes: net.layer_sizes(),
            hidden_activation: "relu".into(),
            output_activation: net.output,
            weights: net.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: net.layers.into_iter().map(|l| l.biases).collect(),
        }
    }
}

impl TryFrom<Checkpoint> for Mlp {
    type Error = Error;

    fn try_from(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: ckpt.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if ckpt.hidden_activation != "relu" {
            return Err(Error::Parse(format!("unsupported hidden activation `{}`", ckpt.hidden_activation)));
        }
        let mut net = Mlp::zeros(&ckpt.layer_sizes, ckpt.output_activation)?;
        if ckpt.weights.len() != net.layers.len() || ckpt.biases.len() != net.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: net.layers.len(),
                got: ckpt.weights.len(),
            });
        }
        for ((layer, w), b) in net.layers.iter_mut().zip(ckpt.weights).zip(ckpt.biases) {
            if w.len() != layer.weights.len() || b.len() != layer.biases.len() {
                return Err(Error::ShapeMismatch {
                    expected: layer.weights.len() + layer.biases.len(),
                    got: w.len() + b.len(),
                });
            }
            layer.weights = w;
            layer.biases = b;
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("checkpoint parameter"));
        }
        Ok(net)
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.values_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Applies one Adam update to `net`.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, opt: &mut AdamState, lr: f64) -> Result<()> {
    opt.step(net, grads, lr)
}
