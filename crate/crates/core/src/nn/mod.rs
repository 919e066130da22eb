//! Minimal dense-network engine with exact analytic gradients.
//!
//! Everything is plain `f64` on flat `Vec`s: a [`DenseNetwork`] is a stack of
//! affine layers, each followed by one of three activations (linear, CReLU,
//! or a bounded tanh squash for actor outputs). `forward` records a [`Tape`]
//! so `backward` can produce exact derivatives of `output_grad · output` with
//! respect to every parameter and to the input, without re-running the
//! forward pass.
//!
//! CReLU emits `[max(x, 0), max(-x, 0)]`, so a layer with `units`
//! pre-activation units feeds `2 * units` values into the next layer. Layer
//! shape validation accounts for that widening.

mod checkpoint;
mod optim;

pub use checkpoint::{load_network, save_network, CheckpointError};
pub use optim::{soft_update, Direction, RmsPropState};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Errors from network construction, evaluation, and parameter updates.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("{what}: expected length {expected}, got {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("layer {layer}: input dim {found} does not chain from previous width {expected}")]
    BadLayerChain {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("tape does not match this network's current parameters (stale or foreign tape)")]
    TapeMismatch,
    #[error("gradient contains non-finite entries; update skipped")]
    NonFiniteGradient,
    #[error("networks are not shape-congruent")]
    ShapeMismatch,
    #[error("tau {0} outside [0, 1]")]
    TauOutOfRange(f64),
}

/// Per-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// Identity.
    Linear,
    /// Concatenated ReLU: `[max(z,0), max(-z,0)]`, doubling the width.
    CRelu,
    /// `scale * tanh(z)` — odd, saturating squash for bounded actor outputs.
    Bounded { scale: f64 },
}

impl Activation {
    /// Output width of a layer with `units` pre-activation units.
    pub fn out_width(self, units: usize) -> usize {
        match self {
            Activation::CRelu => 2 * units,
            _ => units,
        }
    }
}

/// Concatenated ReLU: `[max(x, 0), max(-x, 0)]` elementwise.
///
/// The first half minus the second half reconstructs `x` exactly.
pub fn crelu(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len());
    out.extend(x.iter().map(|&v| v.max(0.0)));
    out.extend(x.iter().map(|&v| (-v).max(0.0)));
    out
}

/// One affine layer: `z = W x + b`, weights row-major `[units x in_dim]`.
#[derive(Debug, Clone)]
pub struct Layer {
    pub(crate) in_dim: usize,
    pub(crate) units: usize,
    pub(crate) activation: Activation,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn out_width(&self) -> usize {
        self.activation.out_width(self.units)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, input: &[f64], z: &mut Vec<f64>, a: &mut Vec<f64>) {
        z.clear();
        for row in 0..self.units {
            let mut sum = self.bias[row];
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            for (wi, xi) in w.iter().zip(input) {
                sum += wi * xi;
            }
            z.push(sum);
        }
        a.clear();
        match self.activation {
            Activation::Linear => a.extend_from_slice(z),
            Activation::CRelu => {
                a.extend(z.iter().map(|&v| v.max(0.0)));
                a.extend(z.iter().map(|&v| (-v).max(0.0)));
            }
            Activation::Bounded { scale } => a.extend(z.iter().map(|&v| scale * v.tanh())),
        }
    }

    /// Given dL/da and the recorded pre-activation z, produce dL/dz.
    fn grad_pre_activation(&self, z: &[f64], d_out: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Linear => d_out.to_vec(),
            Activation::CRelu => {
                let n = self.units;
                (0..n)
                    .map(|j| {
                        let pos = if z[j] > 0.0 { d_out[j] } else { 0.0 };
                        let neg = if z[j] < 0.0 { -d_out[n + j] } else { 0.0 };
                        pos + neg
                    })
                    .collect()
            }
            Activation::Bounded { scale } => z
                .iter()
                .zip(d_out)
                .map(|(&zj, &gj)| {
                    let t = zj.tanh();
                    gj * scale * (1.0 - t * t)
                })
                .collect(),
        }
    }
}

/// Spec for one layer of a network under construction.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation) -> Self {
        Self { units, activation }
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// A fully connected network. Parameters are mutated only through the
/// optimizer ops, which re-stamp the network so stale tapes are rejected.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    stamp: u64,
}

impl DenseNetwork {
    /// Build a randomly initialized network.
    ///
    /// Hidden layers use uniform `±1/sqrt(fan_in)`; the final layer uses
    /// uniform `±3e-3` so initial outputs sit near zero. Biases follow the
    /// same scheme as their layer's weights.
    pub fn new<R: Rng>(input_dim: usize, specs: &[LayerSpec], rng: &mut R) -> Result<Self, NnError> {
        Self::build(input_dim, specs, |layer_idx, fan_in, n, rng| {
            let last = layer_idx == specs.len() - 1;
            let limit = if last { 3e-3 } else { 1.0 / (fan_in as f64).sqrt() };
            (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
        }, rng)
    }

    /// Build a network with all weights and biases zero.
    pub fn zeros(input_dim: usize, specs: &[LayerSpec]) -> Result<Self, NnError> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        Self::build(input_dim, specs, |_, _, n, _| vec![0.0; n], &mut rng)
    }

    fn build<R: Rng>(
        input_dim: usize,
        specs: &[LayerSpec],
        mut init: impl FnMut(usize, usize, usize, &mut R) -> Vec<f64>,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if input_dim == 0 {
            return Err(NnError::InvalidSpec("input dim must be > 0".into()));
        }
        if specs.is_empty() {
            return Err(NnError::InvalidSpec("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut in_dim = input_dim;
        for (idx, spec) in specs.iter().enumerate() {
            if spec.units == 0 {
                return Err(NnError::InvalidSpec(format!("layer {idx} has 0 units")));
            }
            if let Activation::Bounded { scale } = spec.activation {
                if !(scale > 0.0) {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: bounded scale must be > 0, got {scale}"
                    )));
                }
            }
            let weights = init(idx, in_dim, spec.units * in_dim, rng);
            let bias = init(idx, in_dim, spec.units, rng);
            let layer = Layer {
                in_dim,
                units: spec.units,
                activation: spec.activation,
                weights,
                bias,
            };
            in_dim = layer.out_width();
            layers.push(layer);
        }
        Ok(Self {
            input_dim,
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub(crate) fn from_layers(input_dim: usize, layers: Vec<Layer>) -> Result<Self, NnError> {
        let mut expect = input_dim;
        for (idx, layer) in layers.iter().enumerate() {
            if layer.in_dim != expect {
                return Err(NnError::BadLayerChain {
                    layer: idx,
                    expected: expect,
                    found: layer.in_dim,
                });
            }
            if layer.weights.len() != layer.units * layer.in_dim
                || layer.bias.len() != layer.units
            {
                return Err(NnError::InvalidSpec(format!(
                    "layer {idx}: parameter array sizes do not match declared shape"
                )));
            }
            expect = layer.out_width();
        }
        Ok(Self {
            input_dim,
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_width()).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters as one flat vector: per layer, weights then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn get_flat_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.weights.len() {
                return l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("flat param index out of range");
    }

    /// Overwrite one parameter by flat index. Re-stamps the network.
    pub fn set_flat_param(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                l.weights[idx] = value;
                self.stamp = fresh_stamp();
                return;
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                l.bias[idx] = value;
                self.stamp = fresh_stamp();
                return;
            }
            idx -= l.bias.len();
        }
        panic!("flat param index out of range");
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Clone with `delta` added to the flat parameter vector (same indexing
    /// as [`flat_params`](Self::flat_params)).
    pub fn with_perturbation(&self, delta: &[f64]) -> DenseNetwork {
        assert_eq!(delta.len(), self.param_count(), "perturbation length mismatch");
        let mut out = self.clone();
        let mut idx = 0;
        for l in &mut out.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v += delta[idx];
                idx += 1;
            }
        }
        out.restamp();
        out
    }

    pub(crate) fn restamp(&mut self) {
        self.stamp = fresh_stamp();
    }

    /// Run the network, recording a tape for a later `backward`.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape), NnError> {
        if input.len() != self.input_dim {
            return Err(NnError::DimMismatch {
                what: "forward input",
                expected: self.input_dim,
                found: input.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let mut z = Vec::new();
            let mut a = Vec::new();
            layer.apply(&cur, &mut z, &mut a);
            cur = a.clone();
            pre.push(z);
            post.push(a);
        }
        let tape = Tape {
            stamp: self.stamp,
            input: input.to_vec(),
            pre,
            post,
        };
        Ok((cur, tape))
    }

    /// Run the network without recording a tape.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim {
            return Err(NnError::DimMismatch {
                what: "forward input",
                expected: self.input_dim,
                found: input.len(),
            });
        }
        let mut cur = input.to_vec();
        let mut z = Vec::new();
        let mut a = Vec::new();
        for layer in &self.layers {
            layer.apply(&cur, &mut z, &mut a);
            std::mem::swap(&mut cur, &mut a);
        }
        Ok(cur)
    }

    /// Exact derivatives of `output_grad · output` with respect to every
    /// parameter and to the input, using the tape from a matching `forward`.
    pub fn backward(
        &self,
        tape: &Tape,
        output_grad: &[f64],
    ) -> Result<(GradientSet, Vec<f64>), NnError> {
        if tape.stamp != self.stamp {
            return Err(NnError::TapeMismatch);
        }
        if output_grad.len() != self.output_dim() {
            return Err(NnError::DimMismatch {
                what: "output grad",
                expected: self.output_dim(),
                found: output_grad.len(),
            });
        }
        let mut grads = GradientSet::zeros_like(self);
        let mut d_out = output_grad.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = layer.grad_pre_activation(&tape.pre[idx], &d_out);
            let input: &[f64] = if idx == 0 { &tape.input } else { &tape.post[idx - 1] };
            let lg = &mut grads.layers[idx];
            let mut d_in = vec![0.0; layer.in_dim];
            for row in 0..layer.units {
                let dz = d_pre[row];
                lg.d_bias[row] = dz;
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                let dw = &mut lg.d_weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    dw[i] = dz * input[i];
                    d_in[i] += w[i] * dz;
                }
            }
            d_out = d_in;
        }
        Ok((grads, d_out))
    }
}

/// Activation record from one `forward` call.
#[derive(Debug, Clone)]
pub struct Tape {
    stamp: u64,
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

/// One gradient array per parameter array of a [`DenseNetwork`].
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub(crate) layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGrad] {
        &self.layers
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        assert_eq!(self.layers.len(), other.layers.len(), "gradient layer count mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            assert_eq!(a.d_weights.len(), b.d_weights.len(), "gradient shape mismatch");
            for (x, y) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *x += y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in l.d_weights.iter_mut().chain(l.d_bias.iter_mut()) {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.d_weights.iter().chain(l.d_bias.iter()).all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.d_weights.iter().chain(l.d_bias.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Flat view aligned with [`DenseNetwork::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.d_weights);
            out.extend_from_slice(&l.d_bias);
        }
        out
    }
}
